"""Shape of s -> f(r, s) on [0, T].

Substituting q = e^{-as} in f'(s) gives the upward parabola

    g(q) = (sigma^2/a) q^2 - (r - b + sigma^2/a) q - b,

so f changes monotonicity where e^{-as} crosses a root of g inside
(e^{-aT}, 1).  This module finds those roots, names the resulting shape and
locates the times where f returns to the level f(T).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy.optimize import bisect

from .errors import DomainError, ParameterError, ScenarioError
from .vasicek import DerivedParams, f_time_derivative, log_discount

__all__ = [
    "Scenario",
    "QuadraticRoots",
    "ScenarioReport",
    "quadratic_roots",
    "classify",
    "invert_f",
]

TIE_TOL = 1e-12
XTOL = 1e-13


class Scenario(str, Enum):
    DEC = "Dec"
    INC = "Inc"
    DEC_INC = "DecInc"
    INC_DEC = "IncDec"
    INC_DEC_INC = "IncDecInc"

    @property
    def case(self) -> int:
        return {"Dec": 1, "Inc": 2, "DecInc": 3, "IncDec": 4, "IncDecInc": 5}[self.value]


@dataclass(frozen=True)
class QuadraticRoots:
    D: float
    u1: float | None = None
    u2: float | None = None


@dataclass(frozen=True)
class ScenarioReport:
    scenario: Scenario
    T: float
    r: float
    D: float
    u1: float | None
    u2: float | None
    w1: float | None
    w2: float | None
    t1: float | None
    t2: float | None
    fT: float
    fw1: float | None = None
    f0: float = 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scenario"] = self.scenario.value
        out["case"] = self.scenario.case
        return out


def quadratic_roots(d: DerivedParams, r: float | None = None) -> QuadraticRoots:
    """Roots of g with the cancellation-free form of the quadratic formula."""
    r = d.r0 if r is None else r
    A = d.sigma**2 / d.a
    B = -(r - d.b + A)
    C = -d.b
    D = B * B - 4.0 * A * C
    if D <= 0:
        return QuadraticRoots(D=D)
    q = -0.5 * (B + math.copysign(math.sqrt(D), B))
    roots = sorted((q / A, C / q))
    return QuadraticRoots(D=D, u1=roots[0], u2=roots[1])


def _interior(u, lo):
    return u is not None and lo + TIE_TOL < u < 1.0 - TIE_TOL


def _solve_level(func, lo, hi, level):
    """Bisection for func(t) = level on a monotone bracket [lo, hi]."""
    g = lambda t: func(t) - level
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    if glo * ghi > 0:
        raise DomainError(f"level {level} not attained on [{lo}, {hi}]")
    return bisect(g, lo, hi, xtol=XTOL, rtol=4 * np.finfo(float).eps, maxiter=400)


def classify(d: DerivedParams, r: float | None = None, T: float = 1.0) -> ScenarioReport:
    """Monotonicity pattern of f(r, .) on [0, T] with its critical and level-crossing times."""
    if not T > 0:
        raise ParameterError(f"horizon T must be > 0, got {T}")
    r = d.r0 if r is None else float(r)
    roots = quadratic_roots(d, r)
    f = lambda s: log_discount(d, r, s)
    fT = f(T)
    lo = math.exp(-d.a * T)

    w1 = w2 = None
    if roots.D > 0:
        if _interior(roots.u2, lo):
            w1 = -math.log(roots.u2) / d.a
        if _interior(roots.u1, lo):
            w2 = -math.log(roots.u1) / d.a
    if w1 is not None and w2 is not None:
        scenario = Scenario.INC_DEC_INC
    elif w1 is not None:
        scenario = Scenario.INC_DEC
    elif w2 is not None:
        scenario = Scenario.DEC_INC
    else:
        # no sign change inside: the sign of f' at the midpoint decides
        mid = f_time_derivative(d, r, T / 2)
        scenario = Scenario.DEC if mid < 0 else Scenario.INC

    t1 = t2 = fw1 = None
    if scenario in (Scenario.INC_DEC, Scenario.INC_DEC_INC):
        fw1 = f(w1)
        if 0.0 < fT < fw1:
            t1 = _solve_level(f, 0.0, w1, fT)
        if scenario is Scenario.INC_DEC:
            t2 = T
        elif fT <= fw1:
            t2 = w1 if fT == fw1 else _solve_level(f, w1, w2, fT)
    elif scenario is Scenario.DEC:
        t2 = T
    elif scenario is Scenario.DEC_INC and fT <= 0.0:
        t2 = _solve_level(f, 0.0, w2, fT)

    rep = ScenarioReport(
        scenario=scenario, T=float(T), r=r, D=roots.D, u1=roots.u1, u2=roots.u2,
        w1=w1, w2=w2, t1=t1, t2=t2, fT=fT, fw1=fw1,
    )
    return rep


def _branch_interval(report: ScenarioReport, branch: str):
    sc = report.scenario
    if branch == "h1":
        if report.w1 is None:
            raise ScenarioError(f"branch h1 needs a local maximum; scenario is {sc.value}")
        return 0.0, report.w1
    if branch == "h2":
        if sc is Scenario.INC:
            raise ScenarioError("branch h2 needs a decreasing stretch; f is increasing")
        lo = report.w1 if report.w1 is not None else 0.0
        hi = report.w2 if report.w2 is not None else report.T
        return lo, hi
    if branch == "h3":
        if report.w2 is None:
            raise ScenarioError(f"branch h3 needs a local minimum; scenario is {sc.value}")
        return report.w2, math.inf
    raise ValueError(f"unknown branch {branch!r}")


def invert_f(d: DerivedParams, r: float | None, branch: str, level: float,
             report: ScenarioReport) -> float:
    """Time t on the chosen monotone branch with f(r, t) = level.

    Branches: ``h1`` increasing up to w1, ``h2`` decreasing from w1 (or 0) to
    w2 (or T), ``h3`` increasing from w2 onwards.
    """
    r = report.r if r is None else r
    f = lambda s: log_discount(d, r, s)
    lo, hi = _branch_interval(report, branch)
    if math.isinf(hi):
        hi = max(2 * lo, 1.0)
        while f(hi) < level:
            hi *= 2
            if hi > 1e8:
                raise DomainError(f"level {level} outside the image of branch h3")
    flo, fhi = f(lo), f(hi)
    if not min(flo, fhi) - 1e-15 <= level <= max(flo, fhi) + 1e-15:
        raise DomainError(
            f"level {level} outside the image [{min(flo, fhi)}, {max(flo, fhi)}] of branch {branch}"
        )
    level = min(max(level, min(flo, fhi)), max(flo, fhi))
    return _solve_level(f, lo, hi, level)
