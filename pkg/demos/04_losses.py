"""
How much loss subtraction can tolerate
======================================

Loss before or after the tap degrades the heralded state. Past a certain
loss no choice of squeezing and tap setting makes the heralded state
more entangled than the unsubtracted one.
"""
import numpy as np

from subtract_sim import Strategy, empirical_fit_lossy, loss_threshold, maximize_rate

for t in (1, 2):
    g = loss_threshold(Strategy.pnrd(t, t))
    print(f"t = {t}: gain stays positive up to gamma2 = {g:.3f}")

# optimal settings versus loss, next to the published empirical curves
print("\ngamma2  lambda_opt  fit    alpha2_opt  fit    rate")
for g in np.arange(0.0, 0.5, 0.1):
    r = maximize_rate(Strategy.pnrd(1, 1), losses=g)
    fit_alpha, fit_lam = empirical_fit_lossy(g)
    print(f"{g:5.2f}   {r.lambda_opt:.4f}     {fit_lam:.3f}  {r.alpha2_opt:.4f}      "
          f"{fit_alpha:.3f}  {r.value:.2e}")

r = maximize_rate(Strategy.pnrd(1, 1), losses=0.6)
print(f"\ngamma2 = 0.6: below threshold = {r.below_threshold}, best gain = {r.metrics.gain:.3f}")
