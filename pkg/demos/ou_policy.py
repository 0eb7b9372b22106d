"""Infinite-horizon OU problem: solve the HJB equation and compare bounds.

Rates follow a mean-reverting OU process (a = 1, sigma_tilde = 0.5,
b_tilde = 0.6); income mu = 1 and the payout rate is capped at xi = 2.
The grid solution is checked against the analytic lower and upper bounds
and the optimal policy is printed along one surplus level.
Run with ``python3 demos/ou_policy.py``.
"""

import numpy as np

from ratecontrol import (ProblemOU, SolverGrid, VasicekParams, beta, reparameterize,
                         solve_hjb_ou, value_bounds_ou)

d = reparameterize(VasicekParams(a=1.0, sigma_tilde=0.5, b_tilde=0.6, r0=0.0))
p = ProblemOU(d, mu=1.0, xi=2.0)
g = SolverGrid.default(p, 101, 101)
vs = solve_hjb_ou(p, g)
print(f"converged in {vs.iterations} policy iterations, residual {vs.residual_norm:.1e}")

R, X = np.meshgrid(vs.r, vs.x, indexing="ij")
lower, upper = value_bounds_ou(p, R, X)
print(f"max(V - upper) = {np.max(vs.values - upper):.2e} (should be <= 0)")
print(f"max(lower - V) = {np.max(lower - vs.values):.2e} (first-order grid error)")

j = int(np.searchsorted(vs.x, 1.0))
print(f"\npolicy at x = {vs.x[j]:.3f}:")
for i in range(0, len(vs.r), 10):
    r = vs.r[i]
    hint = f", pay-all threshold x = {(p.xi - p.mu) * beta(p, r):.3f}" if r < 0 else ""
    print(f"  r = {r:+.3f}: pay {vs.policy[i, j]:g}, V = {vs.values[i, j]:.4f}{hint}")
