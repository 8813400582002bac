"""
Which photons to subtract
=========================

Compare photon-number-resolved outcomes (t, t') at each squeezing value,
each at its own best tap settings. Taking a single photon from one arm
only wins everywhere; taking two photons from one arm becomes more
likely than one from each at strong squeezing.
"""
from subtract_sim import Strategy, maximize_rate
from subtract_sim.optimize import _free_for

outcomes = [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)]


def best_rate(t, tp, lam):
    s = Strategy.pnrd(t, tp)
    free = tuple(f for f in _free_for(s, 0.0, 0.0) if f != "lambda")
    return maximize_rate(s, free=free, fixed={"lambda": lam})


print("lambda " + "".join(f"{str(o):>10}" for o in outcomes) + "   P(2,0)/P(1,1)")
for k in range(1, 10):
    lam = k / 10
    res = [best_rate(t, tp, lam) for t, tp in outcomes]
    ratio = res[2].metrics.probability / res[1].metrics.probability
    print(f"{lam:5.1f}  " + "".join(f"{r.value:10.2e}" for r in res) + f"   {ratio:8.3f}")
