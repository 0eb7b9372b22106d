"""Monte Carlo cross-validation of the closed forms.

Each check pairs an estimator from :mod:`ratecontrol.montecarlo` with the
closed form it should reproduce and records the deviation in standard
errors.  The suite is shared by the ``mc-check`` command and the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .gbm import GbmParams, expected_discount_gbm, value_gbm_large_xi, value_gbm_small_xi
from .montecarlo import McConfig, McEstimate, estimate_bond_price, estimate_gbm_discount, evaluate_policy
from .ou_hjb import ProblemOU, analytic_value_hat_ou, analytic_value_small_xi_ou
from .quadrature import tail_envelope
from .strategy import PiecewiseStrategy
from .vasicek import DerivedParams, VasicekParams, bond_price, reparameterize
from .zero_bond import ProblemZB, optimal_strategy, value

__all__ = ["Check", "bond_price_checks", "gbm_discount_checks", "policy_checks", "mc_suite"]

EXAMPLE = DerivedParams(a=1.0, sigma=1.0, b=-0.1, r0=-0.2)

BOND_SETS = [
    (EXAMPLE, 4.0),
    (reparameterize(VasicekParams(a=1.0, sigma_tilde=0.5, b_tilde=0.6, r0=0.0)), 5.0),
    (reparameterize(VasicekParams(a=0.5, sigma_tilde=0.2, b_tilde=0.05, r0=0.03)), 10.0),
    (reparameterize(VasicekParams(a=2.0, sigma_tilde=1.0, b_tilde=0.3, r0=0.5)), 2.0),
    (reparameterize(VasicekParams(a=0.3, sigma_tilde=0.1, b_tilde=0.04, r0=-0.01)), 8.0),
]

GBM_SETS = [
    (GbmParams(m=1.0, sigma=1.0, r0=0.5), 2.0),
    (GbmParams(m=0.5, sigma=0.3, r0=0.0), 3.0),
    (GbmParams(m=0.2, sigma=0.5, r0=-0.2), 5.0),
    (GbmParams(m=2.0, sigma=1.5, r0=1.0), 1.0),
    (GbmParams(m=0.1, sigma=0.1, r0=0.1), 10.0),
]


@dataclass(frozen=True)
class Check:
    name: str
    estimate: McEstimate
    target: float
    n_se: float = 4.0

    @property
    def deviation(self) -> float:
        return self.estimate.deviation(self.target)

    @property
    def passed(self) -> bool:
        return self.deviation <= self.n_se

    def to_dict(self) -> dict:
        out = {"name": self.name, "target": self.target, "deviation_se": self.deviation,
               "tolerance_se": self.n_se, "pass": self.passed}
        out.update(self.estimate.to_dict())
        return out


def bond_price_checks(seed: int, n_paths: int) -> list[Check]:
    out = []
    for k, (d, s) in enumerate(BOND_SETS):
        cfg = McConfig(seed=seed + k, n_paths=n_paths, dt=min(0.01, s / 200), horizon=s)
        est = estimate_bond_price(d, d.r0, s, cfg)
        out.append(Check(f"bond_price[a={d.a:g},sigma={d.sigma:.4g},b={d.b:.4g},r={d.r0:g},s={s:g}]",
                         est, bond_price(d, d.r0, s)))
    return out


def gbm_discount_checks(seed: int, n_paths: int) -> list[Check]:
    out = []
    for k, (p, s) in enumerate(GBM_SETS):
        cfg = McConfig(seed=seed + 100 + k, n_paths=n_paths)
        est = estimate_gbm_discount(p, s, cfg)
        out.append(Check(f"gbm_discount[m={p.m:g},sigma={p.sigma:g},r={p.r0:g},s={s:g}]",
                         est, expected_discount_gbm(p, s)))
    return out


def _horizon_for(tail, se_guess: float, budget: float = 0.1) -> float:
    S = 5.0
    while tail(S) > budget * se_guess:
        S += 2.5
    return S


def _pilot_se(model, strategy, x0, seed, n_paths, mu=None) -> float:
    cfg = McConfig(seed=seed, n_paths=2000, dt=0.05, horizon=10.0)
    pilot = evaluate_policy(model, strategy, x0, cfg, mu=mu)
    return max(pilot.std_error * math.sqrt(2000 / n_paths), 1e-9)


def policy_checks(seed: int, n_paths: int, dt: float = 0.02) -> list[Check]:
    """Policy evaluation against closed forms in all three discounting models."""
    out = []
    k = seed + 200
    # GBM: constant xi <= mu, and pay xi until the surplus is gone then mu
    gbm_cases = [
        (GbmParams(m=1.0, sigma=1.0, r0=0.0, mu=1.0, xi=1.0), 0.0),
        (GbmParams(m=1.0, sigma=1.0, r0=0.0, mu=1.0, xi=2.0), 1.0),
        (GbmParams(m=0.6, sigma=0.4, r0=0.2, mu=0.5, xi=1.5), 2.0),
    ]
    for p, x0 in gbm_cases:
        if p.xi <= p.mu:
            strat = PiecewiseStrategy(((0.0, math.inf, p.xi),))
            target = value_gbm_small_xi(p)
        else:
            tau = x0 / (p.xi - p.mu)
            strat = PiecewiseStrategy.build([(0.0, tau, p.xi), (tau, math.inf, p.mu)])
            target = value_gbm_large_xi(p, x0)
        se = _pilot_se(p, strat, x0, k, n_paths)
        S = _horizon_for(lambda S: max(p.xi, p.mu) * math.exp(-p.r0 - p.k * S) / p.k, se)
        est = evaluate_policy(p, strat, x0, McConfig(seed=k, n_paths=n_paths, dt=dt, horizon=S))
        out.append(Check(f"gbm_policy[m={p.m:g},sigma={p.sigma:g},mu={p.mu:g},xi={p.xi:g},x={x0:g}]",
                         est, target))
        k += 1
    # OU: constant xi <= mu, and the xi-then-mu candidate
    d = reparameterize(VasicekParams(a=1.0, sigma_tilde=0.5, b_tilde=0.6, r0=0.2))
    for mu, xi, x0 in [(1.0, 0.8, 0.0), (1.0, 2.0, 1.0)]:
        p = ProblemOU(d, mu=mu, xi=xi)
        if p.small_cap:
            strat = PiecewiseStrategy(((0.0, math.inf, xi),))
            target = analytic_value_small_xi_ou(p, d.r0)
        else:
            tau = x0 / (xi - mu)
            strat = PiecewiseStrategy.build([(0.0, tau, xi), (tau, math.inf, mu)])
            target = analytic_value_hat_ou(p, d.r0, x0)
        se = _pilot_se(d, strat, x0, k, n_paths, mu=mu)
        S = _horizon_for(lambda S: max(xi, mu) * float(tail_envelope(d, d.r0, S)), se)
        est = evaluate_policy(d, strat, x0, McConfig(seed=k, n_paths=n_paths, dt=dt, horizon=S), mu=mu)
        out.append(Check(f"ou_policy[b={d.b:.4g},mu={mu:g},xi={xi:g},x={x0:g}]", est, target))
        k += 1
    # zero-bond: the optimal plans of the worked example, leftover paid at T
    for xi in (1.0, 4.0, math.inf):
        p = ProblemZB(EXAMPLE, mu=2.0, xi=xi, T=4.0)
        x0 = 1.0
        strat = optimal_strategy(p, 0.0, x0)
        cfg = McConfig(seed=k, n_paths=n_paths, dt=0.01, horizon=p.T)
        est = evaluate_policy(EXAMPLE, strat, x0, cfg, mu=p.mu, terminal_payout=True)
        out.append(Check(f"zero_bond_policy[xi={xi:g},x={x0:g}]", est, value(p, 0.0, x0)))
        k += 1
    return out


def mc_suite(seed: int = 20240601, n_paths: int = 100_000) -> list[Check]:
    return bond_price_checks(seed, n_paths) + gbm_discount_checks(seed, n_paths) + policy_checks(seed, n_paths)
