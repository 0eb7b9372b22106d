"""Finite-horizon consumption with zero-coupon-bond discounting.

The agent's surplus grows at rate ``mu`` and is paid out at a rate in
``[0, xi]`` (or in lumps when ``xi`` is infinite).  A unit paid at time ``s``
is worth ``exp(f(s))``; whatever is left at ``T`` is paid there.  The value
function is assembled backwards from ``T``:

* ``[t2, T]``   wait and pay everything at ``T``;
* ``[w1, t2)``  pay at the cap until the surplus is gone, then at ``mu``;
* ``[t1, w1)``  wait ``chi(t, x)``, then pay at the cap;
* ``[0, t1)``   wait until ``t1``.

Monotone and single-extremum shapes of ``f`` are handled as degenerate
versions of the same recursion (see :func:`backward_plan`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .errors import DomainError, ParameterError, ScenarioError
from .quadrature import BondIntegral
from .scenarios import Scenario, ScenarioReport, _solve_level, classify
from .strategy import PiecewiseStrategy
from .vasicek import DerivedParams, log_discount

__all__ = [
    "ProblemZB",
    "BackwardPlan",
    "backward_plan",
    "pay_set",
    "strategy_small_xi",
    "value_small_xi",
    "chi",
    "value_large_xi",
    "strategy_large_xi",
    "value_unrestricted",
    "strategy_unrestricted",
    "value",
    "optimal_strategy",
    "feedback_control",
    "strategy_return",
    "hjb_residual_zb",
]


@dataclass(frozen=True)
class ProblemZB:
    derived: DerivedParams
    mu: float
    xi: float
    T: float
    report: ScenarioReport = field(init=False, repr=False, compare=False)
    integral: BondIntegral = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.mu >= 0:
            raise ParameterError(f"income rate mu must be >= 0, got {self.mu}")
        if not self.xi > 0:
            raise ParameterError(f"consumption cap xi must be > 0, got {self.xi}")
        if not self.T > 0:
            raise ParameterError(f"horizon T must be > 0, got {self.T}")
        object.__setattr__(self, "report", classify(self.derived, self.derived.r0, self.T))
        object.__setattr__(self, "integral", BondIntegral(self.derived, self.derived.r0, self.T))

    @property
    def r(self) -> float:
        return self.derived.r0

    @property
    def unrestricted(self) -> bool:
        return math.isinf(self.xi)

    def f(self, s):
        return log_discount(self.derived, self.r, s)

    def discount(self, s):
        return math.exp(self.f(s))

    def I(self, lo, hi) -> float:
        """int_lo^hi exp(f(s)) ds."""
        return self.integral.between(lo, hi)

    @property
    def discount_T(self) -> float:
        return math.exp(self.report.fT)


@dataclass(frozen=True)
class BackwardPlan:
    """Switching times of the backward construction.

    ``peak`` is where full-rate payment may start (w1, or 0 when f starts
    decreasing), ``stop`` is t2, and ``wait_from`` is where the chi-region
    begins (t1, or 0 when f(0) >= f(T)).  ``wait_all`` marks shapes where
    paying everything at T is optimal.
    """

    wait_all: bool
    peak: float = 0.0
    stop: float = 0.0
    wait_from: float | None = None


def backward_plan(p: ProblemZB) -> BackwardPlan:
    rep = p.report
    sc = rep.scenario
    if sc is Scenario.INC:
        return BackwardPlan(wait_all=True)
    if sc is Scenario.DEC:
        return BackwardPlan(False, peak=0.0, stop=p.T)
    if sc is Scenario.DEC_INC:
        if rep.t2 is None or rep.t2 <= 0.0:
            return BackwardPlan(wait_all=True)
        return BackwardPlan(False, peak=0.0, stop=rep.t2)
    # IncDec / IncDecInc
    if rep.t2 is None or rep.fw1 <= rep.fT:
        return BackwardPlan(wait_all=True)
    wait_from = rep.t1 if rep.t1 is not None else 0.0
    return BackwardPlan(False, peak=rep.w1, stop=rep.t2, wait_from=wait_from)


def _check_state(p: ProblemZB, t: float, x: float) -> None:
    if not 0.0 <= t <= p.T:
        raise DomainError(f"t must lie in [0, {p.T}], got {t}")
    if not x >= 0.0:
        raise DomainError(f"surplus x must be >= 0, got {x}")


# -- xi <= mu ---------------------------------------------------------------

def pay_set(p: ProblemZB) -> list[tuple[float, float]]:
    """Intervals of [0, T] (positive length) where f(s) >= f(T)."""
    rep = p.report
    knots = sorted({0.0, p.T} | {w for w in (rep.w1, rep.w2) if w is not None})
    fT = rep.fT
    out: list[list[float]] = []
    for lo, hi in zip(knots, knots[1:]):
        flo, fhi = p.f(lo), p.f(hi)
        if flo >= fT and fhi >= fT:
            piece = [lo, hi]
        elif flo < fT and fhi < fT:
            continue
        else:
            c = _solve_level(p.f, lo, hi, fT)
            piece = [c, hi] if fhi >= fT else [lo, c]
        if piece[1] - piece[0] <= 0:
            continue
        if out and abs(out[-1][1] - piece[0]) < 1e-14:
            out[-1][1] = piece[1]
        else:
            out.append(piece)
    return [(a, b) for a, b in out if b - a > 1e-12]


def _small_pieces(p: ProblemZB, t: float):
    return [(max(a, t), b) for a, b in pay_set(p) if b > t]


def strategy_small_xi(p: ProblemZB, t: float, x: float) -> PiecewiseStrategy:
    """Rate xi exactly where f(s) >= f(T), zero elsewhere; does not depend on x."""
    if p.xi > p.mu:
        raise ParameterError(f"strategy_small_xi needs xi <= mu (xi={p.xi}, mu={p.mu})")
    _check_state(p, t, x)
    pieces, cursor = [], t
    for a, b in _small_pieces(p, t):
        pieces.append((cursor, a, 0.0))
        pieces.append((a, b, p.xi))
        cursor = b
    pieces.append((cursor, p.T, 0.0))
    return PiecewiseStrategy.build(pieces)


def value_small_xi(p: ProblemZB, t: float, x: float) -> float:
    if p.xi > p.mu:
        raise ParameterError(f"value_small_xi needs xi <= mu (xi={p.xi}, mu={p.mu})")
    _check_state(p, t, x)
    paid, length = 0.0, 0.0
    for a, b in _small_pieces(p, t):
        paid += p.I(a, b)
        length += b - a
    return p.xi * paid + (x + p.mu * (p.T - t) - p.xi * length) * p.discount_T


# -- xi > mu ----------------------------------------------------------------

def _require_large(p: ProblemZB) -> None:
    if not p.mu < p.xi < math.inf:
        raise ParameterError(f"needs mu < xi < inf (xi={p.xi}, mu={p.mu})")


def _v1(p: ProblemZB, t: float, x: float) -> float:
    return (x + p.mu * (p.T - t)) * p.discount_T


def _v2(p: ProblemZB, plan: BackwardPlan, t: float, x: float) -> float:
    stop, xi, mu = plan.stop, p.xi, p.mu
    end = t + x / (xi - mu)
    if end >= stop:
        return xi * p.I(t, stop) + _v1(p, stop, x + (mu - xi) * (stop - t))
    return xi * p.I(t, end) + mu * p.I(end, stop) + _v1(p, stop, 0.0)


def _chi(p: ProblemZB, plan: BackwardPlan, t: float, x: float) -> float:
    w1, stop, fT = plan.peak, plan.stop, p.report.fT
    k = p.xi - p.mu

    def phi(s):
        # marginal value of the last unit paid: f up to t2, f(T) afterwards
        return p.f(s) if s < stop else fT

    def h(u):
        return p.f(t + u) - phi(t + u + (x + p.mu * u) / k)

    hi = w1 - t
    h0 = h(0.0)
    if h0 > 0.0:
        return 0.0
    lo = 0.0
    if h0 >= -1e-13:
        # a tie at u = 0 (x = 0, or t = t1 up to rounding): look just to the right
        lo = 1e-10 * hi
        if h(lo) > 0.0:
            return 0.0
    if h(hi) <= 0.0:
        return hi
    return bisect(h, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=400)


def chi(p: ProblemZB, t: float, x: float) -> float:
    """Waiting time before paying at the cap, defined for t in [t1, w1)."""
    _require_large(p)
    plan = backward_plan(p)
    if plan.wait_all or plan.wait_from is None:
        raise DomainError(f"chi is undefined for scenario {p.report.scenario.value}")
    if not plan.wait_from <= t < plan.peak:
        raise DomainError(f"chi is defined on [{plan.wait_from}, {plan.peak}), got t={t}")
    if not x >= 0:
        raise DomainError(f"surplus x must be >= 0, got {x}")
    return _chi(p, plan, t, x)


def _v3(p: ProblemZB, plan: BackwardPlan, t: float, x: float) -> float:
    c = _chi(p, plan, t, x)
    w1 = plan.peak
    x_w1 = max(0.0, x + p.xi * c + (p.mu - p.xi) * (w1 - t))
    return p.xi * p.I(t + c, w1) + _v2(p, plan, w1, x_w1)


def value_large_xi(p: ProblemZB, t: float, x: float) -> float:
    _require_large(p)
    _check_state(p, t, x)
    plan = backward_plan(p)
    if plan.wait_all or t >= plan.stop:
        return _v1(p, t, x)
    if t >= plan.peak:
        return _v2(p, plan, t, x)
    if plan.wait_from is None:
        raise ScenarioError("no construction for t before the first payment window")
    if t >= plan.wait_from:
        return _v3(p, plan, t, x)
    return _v3(p, plan, plan.wait_from, x + p.mu * (plan.wait_from - t))


def _large_pieces(p: ProblemZB, plan: BackwardPlan, t: float, x: float) -> list:
    T, xi, mu = p.T, p.xi, p.mu
    if plan.wait_all or t >= plan.stop:
        return [(t, T, 0.0)]
    if t >= plan.peak:
        end = min(t + x / (xi - mu), plan.stop)
        return [(t, end, xi), (end, plan.stop, mu), (plan.stop, T, 0.0)]
    if t < plan.wait_from:
        s = plan.wait_from
        return [(t, s, 0.0)] + _large_pieces(p, plan, s, x + mu * (s - t))
    c = _chi(p, plan, t, x)
    w1 = plan.peak
    x_w1 = max(0.0, x + xi * c + (mu - xi) * (w1 - t))
    return [(t, t + c, 0.0), (t + c, w1, xi)] + _large_pieces(p, plan, w1, x_w1)


def strategy_large_xi(p: ProblemZB, t: float, x: float) -> PiecewiseStrategy:
    """Forward simulation of the feedback rule as explicit segments."""
    _require_large(p)
    _check_state(p, t, x)
    return PiecewiseStrategy.build(_large_pieces(p, backward_plan(p), t, x))


# -- unrestricted -----------------------------------------------------------

def _require_unrestricted(p: ProblemZB) -> None:
    if not p.unrestricted:
        raise ParameterError("needs xi = inf (unrestricted payments)")


def value_unrestricted(p: ProblemZB, t: float, x: float) -> float:
    _require_unrestricted(p)
    _check_state(p, t, x)
    plan = backward_plan(p)
    if plan.wait_all or t >= plan.stop:
        return _v1(p, t, x)
    tail = p.mu * p.I(max(t, plan.peak), plan.stop) + _v1(p, plan.stop, 0.0)
    if t >= plan.peak:
        return x * p.discount(t) + tail
    w1 = plan.peak
    return (x + p.mu * (w1 - t)) * p.discount(w1) + tail


def strategy_unrestricted(p: ProblemZB, t: float, x: float) -> PiecewiseStrategy:
    _require_unrestricted(p)
    _check_state(p, t, x)
    plan = backward_plan(p)
    T, mu = p.T, p.mu
    if plan.wait_all or t >= plan.stop:
        return PiecewiseStrategy.build([(t, T, 0.0)], [(T, x + mu * (T - t))])
    start = max(t, plan.peak)
    lump = x + mu * (start - t)
    return PiecewiseStrategy.build(
        [(t, start, 0.0), (start, plan.stop, mu), (plan.stop, T, 0.0)],
        [(start, lump), (T, mu * (T - plan.stop))],
    )


# -- dispatch and diagnostics -----------------------------------------------

def value(p: ProblemZB, t: float, x: float) -> float:
    """Value function for whichever payment regime ``p`` describes."""
    if p.unrestricted:
        return value_unrestricted(p, t, x)
    if p.xi <= p.mu:
        return value_small_xi(p, t, x)
    return value_large_xi(p, t, x)


def optimal_strategy(p: ProblemZB, t: float, x: float) -> PiecewiseStrategy:
    if p.unrestricted:
        return strategy_unrestricted(p, t, x)
    if p.xi <= p.mu:
        return strategy_small_xi(p, t, x)
    return strategy_large_xi(p, t, x)


def feedback_control(p: ProblemZB, t: float, x: float) -> tuple[float, float]:
    """(rate, lump) prescribed at the state (t, x)."""
    _check_state(p, t, x)
    if t >= p.T:
        return 0.0, x
    if not p.unrestricted and p.xi <= p.mu:
        return (p.xi if p.f(t) >= p.report.fT else 0.0), 0.0
    plan = backward_plan(p)
    if plan.wait_all or t >= plan.stop:
        return 0.0, 0.0
    if p.unrestricted:
        return (p.mu, x) if t >= plan.peak else (0.0, 0.0)
    if t >= plan.peak:
        return (p.xi if x > 0 else p.mu), 0.0
    if t >= plan.wait_from and _chi(p, plan, t, x) == 0.0:
        return p.xi, 0.0
    return 0.0, 0.0


def strategy_return(p: ProblemZB, strategy: PiecewiseStrategy, t: float, x: float) -> float:
    """Return function of an open-loop plan started at (t, x), leftover paid at T."""
    total = sum(c * p.I(a, min(b, p.T)) for a, b, c in strategy.segments if c > 0)
    total += sum(m * p.discount(s) for s, m in strategy.lumps)
    left = x + p.mu * (p.T - t) - strategy.consumed(p.T)
    return total + left * p.discount_T


def hjb_residual_zb(p: ProblemZB, t: float, x: float, h: float = 1e-5) -> float:
    """HJB residual of the implemented value at (t, x) using central differences.

    Restricted: V_t + mu V_x + sup_{0<=c<=xi} c (e^{f(t)} - V_x).
    Unrestricted: max(V_t + mu V_x, e^{f(t)} - V_x).
    """
    Vt = (value(p, t + h, x) - value(p, t - h, x)) / (2 * h)
    Vx = (value(p, t, x + h) - value(p, t, x - h)) / (2 * h)
    gap = p.discount(t) - Vx
    if p.unrestricted:
        return max(Vt + p.mu * Vx, gap)
    return Vt + p.mu * Vx + p.xi * max(gap, 0.0)
