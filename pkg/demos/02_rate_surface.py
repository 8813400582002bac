"""
Where the rate peaks
====================

Strong squeezing gives more entanglement to start with; a strong tap
makes detection likely but throws entanglement away. The product of
gain and heralding probability has a single interior peak.
"""
import numpy as np

from subtract_sim import Strategy, empirical_fit_alpha_opt, maximize_rate
from subtract_sim.evaluate import grid_values

t1 = Strategy.pnrd(1, 1)

# a coarse view of the surface (rates x 1e3)
lam = np.linspace(0.1, 0.9, 9)
alpha2 = np.linspace(0.5, 0.95, 10)
L, A = np.meshgrid(lam, alpha2, indexing="ij")
rate = grid_values(t1, 0.0, 0.0, L, A, A, tied=True)[3]
print("alpha2: " + " ".join(f"{a:6.2f}" for a in alpha2))
for k, row in enumerate(rate):
    print(f"lam {lam[k]:.1f} " + " ".join(f"{1e3 * v:6.2f}" for v in row))

best = maximize_rate(t1)
print(f"\noptimum: lambda = {best.lambda_opt:.4f}, alpha2 = {best.alpha2_opt:.4f}, "
      f"rate = {best.value:.6f} ({best.evaluations} evaluations)")

# at fixed squeezing the best tap setting follows a simple quadratic
print("\nlambda  alpha2_opt  quadratic fit")
for x in (0.3, 0.5, 0.7, 0.9):
    r = maximize_rate(t1, free=("alpha2",), fixed={"lambda": x})
    print(f"{x:5.1f}   {r.alpha2_opt:.4f}      {empirical_fit_alpha_opt(x):.4f}")
