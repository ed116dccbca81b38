"""Classical simulator and trainer for Hong-Ou-Mandel shallow networks.

The forward pass of each network is the coincidence rate of two single
photons at a balanced beam splitter: one photon carries the input image,
the other a mixture (or superposition) of trainable hidden patterns.
"""

from .dataio import DatasetSplit, RawImage, encode_input, load_cifar10, load_idx, make_binary_task
from .learn import TrainConfig, evaluate, train
from .models import (
    ClassicalModel,
    MixtureModel,
    SuperpositionModel,
    coincidence_prob,
    forward_classical,
    forward_mixture,
    forward_single,
    forward_superposition,
    postprocess,
    predict,
    predict_proba,
)
from .photonics import binomial_halfwidth, hoeffding_budget, sample_shots
from .statevec import DensityMatrix, coincidence_general, density_from_mixture, density_from_superposition

__version__ = "0.1.0"
