"""
Click detectors instead of photon counters
==========================================

Threshold detectors only report "on" (at least one photon) or "off".
Their four outcome probabilities have closed forms; the entanglement has
to come from the block engine. Which click pattern is worth keeping
depends on the losses of the two arms.
"""
import numpy as np

from subtract_sim import Config, Strategy, apd_probabilities, evaluate, strategy_frontier

cfg = Config.from_fractions(0.5, 0.7, 0.1, 0.6, 0.2, Strategy.apd("on", "on"))
p = apd_probabilities(cfg)
print("P(off,off), P(off,on), P(on,off), P(on,on) =", np.round(p, 6), " sum", sum(p))

# "on" also accepts two or more photons, which costs some entanglement
for lam in (0.2, 0.5, 0.8):
    on_on = evaluate(Config.from_fractions(lam, 0.85, strategy=Strategy.apd("on", "on")))
    one_one = evaluate(Config.from_fractions(lam, 0.85, strategy=Strategy.pnrd(1, 1)))
    print(f"lambda {lam}: E_N(on,on) = {on_on.log_negativity:.4f}, "
          f"E_N(1,1) = {one_one.log_negativity:.4f}")

# best optimised rate per loss cell (a small grid; the full 20x20 takes minutes)
grid = np.linspace(0.0, 0.4, 5)
f = strategy_frontier(["on,on", "on,off"], grid)
print("\n(on,on) minus (on,off) optimised rate; rows gamma2, columns gamma2'")
for g, row in zip(grid, f.difference):
    print(f"{g:4.2f} " + " ".join(f"{v:+.2e}" for v in row))
