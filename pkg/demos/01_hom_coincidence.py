"""Two photons on a beam splitter: how the coincidence rate reads out overlap.

Run: python demos/01_hom_coincidence.py
"""

import numpy as np

from homnet import MixtureModel, SuperpositionModel, forward_mixture, forward_superposition
from homnet.statevec import coincidence_general, density_from_mixture

N = 4
e = np.eye(N)

# Identical photons bunch (no coincidences); orthogonal ones behave classically.
print("identical   p =", coincidence_general(e[0], np.outer(e[0], e[0])))
print("orthogonal  p =", coincidence_general(e[0], np.outer(e[1], e[1])))

# A hidden photon in a statistical mixture of two pixel patterns.
W = e[:2]
w = np.array([0.5, 0.5])
U = density_from_mixture(W, w)
x_plus = (e[0] + e[1]) / np.sqrt(2)
x_minus = (e[0] - e[1]) / np.sqrt(2)

mix = MixtureModel(W, w, track_K=False)
sup = SuperpositionModel(W, w / np.linalg.norm(w))
print()
print("input         mixture f   superposition f   p from density matrix")
for name, x in (("(e0+e1)/√2", x_plus), ("(e0-e1)/√2", x_minus)):
    print(f"{name:12s}  {forward_mixture(mix, x):9.3f}   {forward_superposition(sup, x):15.3f}"
          f"   {coincidence_general(x, U):10.3f}")

# The mixture cannot tell the two inputs apart; the coherent state can,
# but any superposition collapses to one effective pattern v = sum w_i W_i.
print()
print("effective superposition pattern:", sup.effective_pattern())
