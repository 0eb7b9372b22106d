"""Worked zero-bond example: critical times, optimal strategy and value.

Short rate: Vasicek with a = 1, sigma = 1, b = -0.1 (derived form), r0 = -0.2.
The bond matures at T = 4 and the consumption rate is capped at mu = 2.
Run with ``python3 demos/example_zero_bond.py``.
"""

import math

from ratecontrol import DerivedParams, ProblemZB, classify, optimal_strategy
from ratecontrol.zero_bond import value

d = DerivedParams(a=1.0, sigma=1.0, b=-0.1, r0=-0.2)
rep = classify(d, d.r0, 4.0)
print(f"scenario {rep.scenario}: w1={rep.w1:.4f} w2={rep.w2:.4f} t1={rep.t1:.4f} t2={rep.t2:.4f}")

for xi in (1.0, 4.0, math.inf):
    p = ProblemZB(d, mu=2.0, xi=xi, T=4.0)
    strat = optimal_strategy(p, 0.0, 1.0)
    print(f"\nxi = {xi}: value at (t, x) = (0, 1) is {value(p, 0.0, 1.0):.6f}")
    for start, end, rate in strat.segments:
        print(f"  pay at rate {rate:g} on [{start:.4f}, {end:.4f})")
    for when, amount in strat.lumps:
        print(f"  lump payment {amount:.4f} at t = {when:.4f}")
