"""Geometric-Brownian short rate: closed-form values and a Monte Carlo check.

The value of the capped problem is compared with a simulated estimate of
the constant-rate policy, which is optimal when xi <= mu.
Run with ``python3 demos/gbm_values.py``.
"""

import math

import numpy as np

from ratecontrol import (GbmParams, McConfig, PiecewiseStrategy, evaluate_policy,
                         value_gbm_large_xi, value_gbm_small_xi, value_gbm_unrestricted)

xs = np.linspace(0.0, 3.0, 4)
small = GbmParams(m=1.0, sigma=1.0, r0=0.0, mu=1.0, xi=0.5)
large = GbmParams(m=1.0, sigma=1.0, r0=0.0, mu=1.0, xi=2.0)
free = GbmParams(m=1.0, sigma=1.0, r0=0.0, mu=1.0, xi=math.inf)
print("x      xi=0.5    xi=2      unrestricted")
for x in xs:
    print(f"{x:<6.2f} {value_gbm_small_xi(small):<9.4f} {value_gbm_large_xi(large, x):<9.4f} "
          f"{value_gbm_unrestricted(free, x):.4f}")

strat = PiecewiseStrategy(((0.0, math.inf, small.xi),))
est = evaluate_policy(small, strat, 0.0, McConfig(seed=1, n_paths=50_000, dt=0.02, horizon=40.0))
print(f"\nMonte Carlo, constant rate {small.xi}: {est.mean:.4f} +/- {est.std_error:.4f} "
      f"(closed form {value_gbm_small_xi(small):.4f})")
