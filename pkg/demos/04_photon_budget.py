"""How many photon pairs does a prediction need?

Run: python demos/04_photon_budget.py
"""

from homnet import photonics

print("epsilon  delta   shots")
for eps in (0.1, 0.05, 0.02, 0.01):
    for delta in (0.05, 0.01):
        b = photonics.hoeffding_budget(eps, delta)
        print(f"{eps:7.2f}  {delta:5.2f}  {b.n_required:6d}")

# The bound holds for the coincidence frequency. The response estimate
# f = 1 - 2 * frequency has twice the error, so the study below reports both.
rows = photonics.m_independence_study([2, 32, 256], 0.02, 0.05, repeats=200, seed=0)
print()
print("   M     n   std(f_hat)  |f_hat-f|<=eps  |p_hat-p|<=eps")
for r in rows:
    print(f"{r['M']:4d}  {r['n']:5d}  {r['std_est']:10.4f}  {r['coverage']:14.3f}  "
          f"{r['coverage_p']:14.3f}")
