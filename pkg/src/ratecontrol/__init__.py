"""Optimal consumption under stochastic discounting.

Closed-form and numerical solutions for a deterministic-income agent who
consumes at a capped rate while payments are discounted by a Vasicek short
rate (finite horizon, zero-coupon-bond discounting), by exp(-r_t) with r_t
a Brownian motion with drift, or by an Ornstein-Uhlenbeck short rate on an
infinite horizon.
"""

__version__ = "0.1.0"

from .errors import (AdmissibilityError, ConvergenceError, DomainError, ParameterError,
                     ScenarioError)
from .gbm import (GbmParams, expected_discount_gbm, hjb_residual_gbm, value_gbm_large_xi,
                  value_gbm_small_xi, value_gbm_unrestricted)
from .montecarlo import (McConfig, McEstimate, estimate_bond_price, estimate_gbm_discount,
                         evaluate_policy, simulate_ou_step)
from .ou_hjb import (FeedbackTable, ProblemOU, SolverGrid, ValueSurface, alpha_curve,
                     analytic_value_hat_ou, analytic_value_small_xi_ou, beta,
                     extract_free_boundary, grid_error_estimate, hjb_residual_ou,
                     mc_validate_policy, policy_value_ou, solve_hjb_ou, value_bounds_ou,
                     verify_regularity)
from .scenarios import QuadraticRoots, Scenario, ScenarioReport, classify, invert_f, quadratic_roots
from .strategy import PiecewiseStrategy
from .vasicek import (DerivedParams, VasicekParams, bond_price, conditional_bond_price,
                      f_time_derivative, log_discount, reparameterize)
from .zero_bond import (ProblemZB, chi, hjb_residual_zb, optimal_strategy, strategy_large_xi,
                        strategy_small_xi, strategy_unrestricted, value_large_xi, value_small_xi,
                        value_unrestricted)

__all__ = [
    "AdmissibilityError", "ConvergenceError", "DomainError", "ParameterError", "ScenarioError",
    "GbmParams", "expected_discount_gbm", "hjb_residual_gbm", "value_gbm_large_xi",
    "value_gbm_small_xi", "value_gbm_unrestricted",
    "McConfig", "McEstimate", "estimate_bond_price", "estimate_gbm_discount", "evaluate_policy",
    "simulate_ou_step",
    "FeedbackTable", "ProblemOU", "SolverGrid", "ValueSurface", "alpha_curve",
    "analytic_value_hat_ou", "analytic_value_small_xi_ou", "beta", "extract_free_boundary",
    "grid_error_estimate", "hjb_residual_ou", "mc_validate_policy", "policy_value_ou",
    "solve_hjb_ou", "value_bounds_ou", "verify_regularity",
    "QuadraticRoots", "Scenario", "ScenarioReport", "classify", "invert_f", "quadratic_roots",
    "PiecewiseStrategy",
    "DerivedParams", "VasicekParams", "bond_price", "conditional_bond_price", "f_time_derivative",
    "log_discount", "reparameterize",
    "ProblemZB", "chi", "hjb_residual_zb", "optimal_strategy", "strategy_large_xi",
    "strategy_small_xi", "strategy_unrestricted", "value_large_xi", "value_small_xi",
    "value_unrestricted",
]
