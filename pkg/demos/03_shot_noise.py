"""Estimating the response from a finite number of photon pairs.

Shots are drawn agnostically: each shot picks a mixture component at random
and nobody records which one. The spread of the estimate depends only on the
number of shots, not on the number of neurons.

Run: python demos/03_shot_noise.py
"""

import numpy as np

from homnet import photonics
from homnet.models import forward_mixture

rng = np.random.default_rng(0)
for M in (1, 8, 64):
    model, x = photonics.worst_case_model(M, 16, rng)
    f = forward_mixture(model, x)
    runs = [photonics.sample_shots(model, x, 2000, seed) for seed in range(300)]
    est = np.array([r.estimate_f for r in runs])
    inside = np.mean([abs(r.estimate_f - f) <= r.half_width for r in runs])
    print(f"M={M:3d}  f={f:.3f}  mean estimate {est.mean():.4f}  std {est.std():.4f}  "
          f"within half-width {inside:.2f}")

# Tracking the component of every shot costs M times more photons.
model, x = photonics.worst_case_model(64, 16, rng)
est, shots = photonics.sample_tracked(model, x, 2000, seed=1)
print(f"tracked estimate with M=64: {est:.4f} using {shots} shots")
