import math

import numpy as np
import pytest

from oracles import chi_scan, dp_zero_bond
from ratecontrol import (DerivedParams, PiecewiseStrategy, ProblemZB, chi, f_time_derivative,
                         hjb_residual_zb, log_discount, optimal_strategy, strategy_large_xi,
                         strategy_small_xi, strategy_unrestricted, value_large_xi, value_small_xi,
                         value_unrestricted)
from ratecontrol.errors import DomainError, ParameterError
from ratecontrol.zero_bond import (_chi, _v2, backward_plan, feedback_control, strategy_return,
                                   value)

EXAMPLE = DerivedParams(a=1.0, sigma=1.0, b=-0.1, r0=-0.2)
# positive rates with a positive mean: f decreases on the whole horizon
DEC = DerivedParams(a=1.0, sigma=0.2, b=0.3, r0=0.5)
INC = DerivedParams(a=1.0, sigma=1.0, b=-1.0, r0=-1.0)


def problem(xi, d=EXAMPLE, mu=2.0, T=4.0):
    return ProblemZB(d, mu=mu, xi=xi, T=T)


def wait_value(p, t, x):
    return (x + p.mu * (p.T - t)) * p.discount_T


def test_problem_validation():
    with pytest.raises(ParameterError):
        problem(0.0)
    with pytest.raises(ParameterError):
        problem(1.0, mu=-1.0)
    with pytest.raises(ParameterError):
        problem(1.0, T=0.0)
    with pytest.raises(DomainError):
        value(problem(1.0), 5.0, 1.0)
    with pytest.raises(DomainError):
        value(problem(1.0), 1.0, -1.0)


# -- xi <= mu ----------------------------------------------------------------

def test_small_xi_strategy_pays_between_level_crossings():
    p = problem(1.0)
    strat = strategy_small_xi(p, 0.0, 1.0)
    rep = p.report
    expected = [(0.0, rep.t1, 0.0), (rep.t1, rep.t2, 1.0), (rep.t2, 4.0, 0.0)]
    assert [pytest.approx(seg) for seg in expected] == list(strat.segments)
    assert rep.t1 == pytest.approx(0.1134, abs=5e-4) and rep.t2 == pytest.approx(0.4388, abs=5e-4)
    assert strategy_small_xi(p, 0.0, 2.5) == strat


def test_small_xi_monotone_cases():
    inc = problem(1.0, d=INC)
    assert inc.report.scenario.value == "Inc"
    assert strategy_small_xi(inc, 0.5, 1.0).segments == ((0.5, 4.0, 0.0),)
    dec = problem(1.0, d=DEC)
    assert dec.report.scenario.value == "Dec"
    assert strategy_small_xi(dec, 0.5, 1.0).segments == ((0.5, 4.0, 1.0),)


def test_small_xi_value_edges():
    p = problem(1.0)
    assert value_small_xi(p, 4.0, 1.3) == pytest.approx(1.3 * p.discount_T, rel=1e-14)
    h = 1e-6
    for t in (0.0, 0.2, 1.0):
        slope = (value_small_xi(p, t, 1.0 + h) - value_small_xi(p, t, 1.0 - h)) / (2 * h)
        assert slope == pytest.approx(p.discount_T, abs=1e-8)
    with pytest.raises(ParameterError):
        value_small_xi(problem(4.0), 0.0, 1.0)


def test_small_xi_value_matches_dp_oracle():
    p = problem(1.0)
    xs, V = dp_zero_bond(p, dt=2e-3, keep_times=(0.0,))
    assert value_small_xi(p, 0.0, 1.0) == pytest.approx(float(np.interp(1.0, xs, V[0.0])), abs=2e-3)


# -- xi > mu -----------------------------------------------------------------

def test_chi_against_brute_force_scan():
    p = problem(4.0)
    rep = p.report
    f = lambda s: log_discount(p.derived, p.r, s)
    scan = chi_scan(f, 0.15, 0.05, p.mu, p.xi, rep.w1, rep.t2, rep.fT)
    assert chi(p, 0.15, 0.05) == pytest.approx(scan, abs=1e-5)


def test_chi_properties():
    p = problem(4.0)
    plan = backward_plan(p)
    for t in np.linspace(plan.wait_from, plan.peak, 6)[:-1]:
        for x in (0.0, 0.01, 0.05, 0.2):
            c = chi(p, t, x)
            assert 0.0 <= c <= plan.peak - t + 1e-15
            end = t + c + (x + p.mu * c) / (p.xi - p.mu)
            if 0 < c < plan.peak - t:
                level = p.f(end) if end < plan.stop else p.report.fT
                assert abs(p.f(t + c) - level) < 1e-9
    # enough surplus to finish the full-rate phase before f drops: no waiting
    assert chi(p, plan.wait_from, 3.0) == 0.0


def test_chi_domain():
    p = problem(4.0)
    with pytest.raises(DomainError):
        chi(p, 0.05, 0.1)
    with pytest.raises(DomainError):
        chi(p, 0.3, 0.1)
    with pytest.raises(ParameterError):
        chi(problem(1.0), 0.15, 0.1)


def test_large_xi_terminal_and_wait_regions():
    p = problem(4.0)
    assert value_large_xi(p, 4.0, 0.7) == pytest.approx(0.7 * p.discount_T, rel=1e-14)
    for t in (p.report.t2 + 0.01, 1.0, 3.0):
        assert strategy_large_xi(p, t, 1.0).segments == ((t, 4.0, 0.0),)


def test_large_xi_strategy_at_peak_with_no_surplus():
    p = problem(4.0)
    rep = p.report
    strat = strategy_large_xi(p, rep.w1, 0.0)
    expected = [(rep.w1, rep.t2, 2.0), (rep.t2, 4.0, 0.0)]
    assert [pytest.approx(seg) for seg in expected] == list(strat.segments)


def test_large_xi_strategy_from_t1_waits_then_pays():
    p = problem(4.0)
    rep = p.report
    strat = strategy_large_xi(p, rep.t1, 0.5)
    rates = [c for _, _, c in strat.segments]
    assert rates[0] == 0.0 and rates[1] == 4.0
    assert strat.segments[0][1] == pytest.approx(rep.t1 + chi(p, rep.t1, 0.5), abs=1e-12)
    xs, V = dp_zero_bond(p, dt=1e-3, keep_times=(rep.t1,))
    key = next(iter(V))
    assert strategy_return(p, strat, rep.t1, 0.5) == pytest.approx(
        float(np.interp(0.5, xs, V[key])), abs=5e-3)


@pytest.mark.parametrize("xi", [1.0, 4.0, math.inf])
def test_strategy_reproduces_value(xi):
    p = problem(xi)
    for t in (0.0, 0.05, 0.12, 0.2, 0.3, 0.45, 2.0):
        for x in (0.0, 0.1, 0.5, 1.5, 3.0):
            strat = optimal_strategy(p, t, x)
            assert strat.is_admissible(x, p.mu, p.xi)
            assert strategy_return(p, strat, t, x) == pytest.approx(value(p, t, x), abs=1e-6)


def test_verbatim_third_piece_disagrees_with_dp():
    """The upper limit t2 in the waiting-region formula double counts [w1, t2].

    Integrating only up to w1 (where the next piece takes over) matches the
    dynamic-programming oracle; the literal upper limit t2 misses by ~0.72.
    """
    p = problem(4.0)
    plan = backward_plan(p)

    def v3_literal(t, x):
        c = _chi(p, plan, t, x)
        x_w1 = x + c * p.xi + (p.mu - p.xi) * (plan.peak - t)
        return p.xi * p.I(t + c, plan.stop) + _v2(p, plan, plan.peak, x_w1)

    t = 0.5 * (plan.wait_from + plan.peak)
    xs, V = dp_zero_bond(p, dt=1e-3, keep_times=(t,))
    dp_vals = V[next(iter(V))]
    xs_s = np.linspace(0.0, 3.0, 20)
    dp_at = np.interp(xs_s, xs, dp_vals)
    literal = np.array([v3_literal(t, x) for x in xs_s])
    used = np.array([value_large_xi(p, t, x) for x in xs_s])
    gap_literal = float(np.abs(literal - dp_at).max())
    gap_used = float(np.abs(used - dp_at).max())
    print(f"third piece vs DP: literal upper limit {gap_literal:.3e}, corrected {gap_used:.3e}")
    assert gap_literal > 5e-3
    assert gap_used < 5e-3


# -- unrestricted ---------------------------------------------------------------

def test_unrestricted_terminal_value():
    p = problem(math.inf)
    assert value_unrestricted(p, 4.0, 2.0) == pytest.approx(2.0 * p.discount_T, rel=1e-14)
    with pytest.raises(ParameterError):
        value_unrestricted(problem(4.0), 0.0, 1.0)


def test_unrestricted_waits_when_peak_is_too_low():
    # f increases on [0, T], so paying everything at T is best
    p = problem(math.inf, d=INC)
    for t, x in [(0.0, 1.0), (1.0, 0.0), (3.5, 2.0)]:
        assert value_unrestricted(p, t, x) == pytest.approx(wait_value(p, t, x), rel=1e-14)
        assert strategy_unrestricted(p, t, x).lumps == ((4.0, x + p.mu * (4.0 - t)),)


def test_unrestricted_lumps_at_peak():
    p = problem(math.inf)
    strat = strategy_unrestricted(p, 0.0, 1.0)
    w1 = p.report.w1
    assert strat.lumps[0] == pytest.approx((w1, 1.0 + 2.0 * w1))
    assert strat.rate_at(0.5 * (w1 + p.report.t2)) == 2.0


def test_values_ordered_in_the_cap():
    for t in np.linspace(0.0, 4.0, 9):
        for x in np.linspace(0.0, 3.0, 7):
            lo = wait_value(problem(1.0), t, x)
            v1 = value(problem(1.0), t, x)
            v2 = value(problem(3.0), t, x)
            v4 = value(problem(4.0), t, x)
            vinf = value(problem(math.inf), t, x)
            assert lo - 1e-12 <= v1 <= v2 + 1e-12
            assert v2 <= v4 + 1e-12 and v4 <= vinf + 1e-12


@pytest.mark.parametrize("xi", [1.0, 4.0, math.inf])
def test_value_increasing_in_surplus(xi):
    p = problem(xi)
    xs = np.linspace(0.0, 3.0, 31)
    for t in (0.0, 0.15, 0.3, 1.0):
        vals = np.array([value(p, t, x) for x in xs])
        assert np.all(np.diff(vals) > 0)


def test_feedback_control_regions():
    p = problem(4.0)
    rep = p.report
    assert feedback_control(p, 1.0, 1.0) == (0.0, 0.0)
    assert feedback_control(p, 0.3, 1.0) == (4.0, 0.0)
    assert feedback_control(p, 0.3, 0.0) == (2.0, 0.0)
    assert feedback_control(p, 0.05, 1.0) == (0.0, 0.0)
    assert feedback_control(p, rep.t1, 3.0) == (4.0, 0.0)
    assert feedback_control(p, 4.0, 1.5) == (0.0, 1.5)


# -- HJB -------------------------------------------------------------------------

@pytest.mark.parametrize("xi", [1.0, 4.0, math.inf])
def test_hjb_residual_small(xi):
    p = problem(xi)
    rep = p.report
    rng = np.random.default_rng(17)
    worst = 0.0
    n = 0
    while n < 50:
        t = rng.uniform(0.01, 0.6) if n % 2 else rng.uniform(0.01, 3.99)
        x = rng.uniform(0.01, 3.0)
        if min(abs(t - k) for k in (rep.t1, rep.w1, rep.t2)) < 1e-3:
            continue
        worst = max(worst, abs(hjb_residual_zb(p, t, x)))
        n += 1
    assert worst < 1e-4


def test_wait_region_residual_is_transport_only():
    p = problem(4.0)
    t, x, h = 2.0, 1.0, 1e-5
    vt = (value(p, t + h, x) - value(p, t - h, x)) / (2 * h)
    vx = (value(p, t, x + h) - value(p, t, x - h)) / (2 * h)
    assert vt + p.mu * vx == pytest.approx(0.0, abs=1e-8)
    assert p.discount(t) < vx


def test_unrestricted_value_has_a_time_kink_at_t2():
    """Before t2 the surplus is paid at once, after t2 at T: V_t jumps by x f'(t2) e^{f(T)}."""
    p = problem(math.inf)
    t2, x, h = p.report.t2, 1.0, 1e-4
    V = lambda t: value(p, t, x)
    left = (3 * V(t2) - 4 * V(t2 - h) + V(t2 - 2 * h)) / (2 * h)
    right = (-3 * V(t2) + 4 * V(t2 + h) - V(t2 + 2 * h)) / (2 * h)
    jump = x * f_time_derivative(p.derived, p.r, t2) * p.discount_T
    assert left - right == pytest.approx(jump, abs=1e-6)


def test_strategy_admissibility_guard():
    strat = PiecewiseStrategy.build([(0.0, 1.0, 5.0)])
    assert not strat.is_admissible(0.5, 1.0, 10.0)
    assert strat.is_admissible(4.0, 1.0, 10.0)
    assert not strat.is_admissible(4.0, 1.0, 4.0)
