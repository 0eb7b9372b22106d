"""Infinite-horizon consumption with an Ornstein-Uhlenbeck short rate.

The value function V(r, x) solves

    mu V_x + a (b_tilde - r) V_r + sigma_tilde^2/2 V_rr - r V + sup_{0<=c<=xi} c (1 - V_x) = 0

on r in R, x >= 0.  Two explicit strategies give analytic candidates (pay
``xi`` forever, and pay ``xi`` until the surplus is gone then ``mu``); the
general solution is computed here with a monotone upwind finite-difference
scheme and Howard policy iteration over the bang-bang controls.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from .errors import ConvergenceError, DomainError, ParameterError
from .montecarlo import McConfig, McEstimate, evaluate_policy
from .quadrature import integral_to_infinity, tail_envelope
from .vasicek import DerivedParams, log_discount

__all__ = [
    "ProblemOU",
    "SolverGrid",
    "ValueSurface",
    "RegularityReport",
    "FeedbackTable",
    "analytic_value_small_xi_ou",
    "analytic_value_hat_ou",
    "analytic_value_hat_ou_x",
    "alpha_curve",
    "beta",
    "lipschitz_lambda",
    "value_bounds_ou",
    "solve_hjb_ou",
    "verify_regularity",
    "extract_free_boundary",
    "grid_error_estimate",
    "policy_value_ou",
    "hjb_residual_ou",
    "mc_validate_policy",
]


@dataclass(frozen=True)
class ProblemOU:
    derived: DerivedParams
    mu: float
    xi: float

    def __post_init__(self) -> None:
        if not self.derived.b > 0:
            raise ParameterError(
                f"infinite horizon needs b_tilde > sigma_tilde^2/(2a^2), i.e. b > 0 (b={self.derived.b})"
            )
        if self.mu < 0:
            raise ParameterError(f"mu must be >= 0, got {self.mu}")
        if not 0 < self.xi < math.inf:
            raise ParameterError(f"xi must be finite and > 0, got {self.xi}")

    @property
    def small_cap(self) -> bool:
        return self.xi <= self.mu

    def switch_time(self, x):
        """Time x/(xi - mu) at which paying xi exhausts the surplus (0 if xi <= mu)."""
        x = np.asarray(x, float)
        if self.small_cap:
            return np.zeros_like(x)
        return x / (self.xi - self.mu)


@dataclass(frozen=True)
class SolverGrid:
    r_min: float
    r_max: float
    x_max: float
    n_r: int = 201
    n_x: int = 201
    max_iter: int = 500
    tol: float = 1e-8
    damping: float = 0.5
    boundary: str = "natural"

    def __post_init__(self) -> None:
        if self.boundary not in ("natural", "anchored"):
            raise ParameterError(f"boundary must be 'natural' or 'anchored', got {self.boundary!r}")
        if self.n_r < 16 or self.n_x < 16:
            raise ParameterError("n_r and n_x must be >= 16")
        if not (self.r_min < self.r_max and self.x_max > 0):
            raise ParameterError("need r_min < r_max and x_max > 0")
        if not 0 < self.damping <= 1:
            raise ParameterError("damping must lie in (0, 1]")

    @classmethod
    def default(cls, p: ProblemOU, n_r: int = 201, n_x: int = 201, **kw) -> "SolverGrid":
        d = p.derived
        spread = 3 * d.sigma_tilde / math.sqrt(2 * d.a) + 2
        width = max(p.xi - p.mu, p.xi) if p.small_cap else p.xi - p.mu
        return cls(d.b - spread, d.b + spread, 6 * width * max(1.0, 1.0 / d.b), n_r, n_x, **kw)

    def refined(self) -> "SolverGrid":
        """Grid with both spacings halved."""
        return replace(self, n_r=2 * self.n_r - 1, n_x=2 * self.n_x - 1)

    def coarsened(self) -> "SolverGrid":
        """Grid with both spacings doubled (node counts must be odd)."""
        return replace(self, n_r=(self.n_r + 1) // 2, n_x=(self.n_x + 1) // 2)

    @property
    def r(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.n_r)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.x_max, self.n_x)


@dataclass(frozen=True)
class ValueSurface:
    r: np.ndarray
    x: np.ndarray
    values: np.ndarray
    policy: np.ndarray
    residual_norm: float
    iterations: int
    damped: bool = False
    history: tuple = field(default=(), repr=False)

    @property
    def h_r(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def h_x(self) -> float:
        return float(self.x[1] - self.x[0])

    def interpolate(self, r, x):
        f = RegularGridInterpolator((self.r, self.x), self.values)
        r, x = np.broadcast_arrays(np.asarray(r, float), np.asarray(x, float))
        out = f(np.stack([r, x], axis=-1).reshape(-1, 2)).reshape(r.shape)
        return float(out) if out.ndim == 0 else out

    def feedback(self) -> "FeedbackTable":
        return FeedbackTable(self.r, self.x, self.policy)


class FeedbackTable:
    """Nearest-node lookup of a gridded feedback policy, c = policy(r, x).

    Rates outside the grid are clamped to the first/last interior row; a
    surplus of exactly zero always uses the x = 0 column, so the lookup never
    asks for more than the boundary control.
    """

    def __init__(self, r: np.ndarray, x: np.ndarray, policy: np.ndarray):
        self.r = np.asarray(r, float)
        self.x = np.asarray(x, float)
        self.policy = np.asarray(policy, float)
        self.max_rate = float(self.policy.max())

    def __call__(self, t, r, x):
        r = np.asarray(r, float)
        x = np.asarray(x, float)
        hr = self.r[1] - self.r[0]
        hx = self.x[1] - self.x[0]
        i = np.clip(np.rint((r - self.r[0]) / hr).astype(int), 1, len(self.r) - 2)
        j = np.clip(np.rint(x / hx).astype(int), 0, len(self.x) - 1)
        j = np.where((x > 0) & (j == 0), 1, j)
        return self.policy[i, j]


# ---------------------------------------------------------------- analytic candidates


def analytic_value_small_xi_ou(p: ProblemOU, r=None):
    """Value of paying xi forever: xi * int_0^inf exp(f(r, s)) ds (independent of x)."""
    if not p.small_cap:
        raise ParameterError(f"needs xi <= mu (xi={p.xi}, mu={p.mu})")
    r = p.derived.r0 if r is None else r
    return p.xi * integral_to_infinity(p.derived, r)


def _two_rate_value(d, r, tau, first, second):
    # first * int_0^tau e^f + second * int_tau^inf e^f, one quadrature table per distinct r
    r, tau = np.broadcast_arrays(np.asarray(r, float), np.asarray(tau, float))
    levels, inverse = np.unique(r, return_inverse=True)
    inverse = inverse.reshape(r.shape)
    total = np.empty(r.shape)
    tail = np.empty(r.shape)
    for k, level in enumerate(levels):
        mask = inverse == k
        total[mask] = integral_to_infinity(d, level)
        tail[mask] = integral_to_infinity(d, level, tau[mask])
    out = first * (total - tail) + second * tail
    return float(out) if out.ndim == 0 else out


def analytic_value_hat_ou(p: ProblemOU, r, x):
    """Value of paying xi until the surplus runs out at x/(xi - mu), then mu forever."""
    if p.small_cap:
        raise ParameterError(f"needs xi > mu (xi={p.xi}, mu={p.mu})")
    if np.any(np.asarray(x) < 0):
        raise DomainError("x must be >= 0")
    return _two_rate_value(p.derived, r, p.switch_time(x), p.xi, p.mu)


def analytic_value_hat_ou_x(p: ProblemOU, r, x):
    """x-derivative of the candidate: exp(f(r, x/(xi - mu)))."""
    if p.small_cap:
        raise ParameterError(f"needs xi > mu (xi={p.xi}, mu={p.mu})")
    return np.exp(log_discount(p.derived, r, p.switch_time(x)))


# ---------------------------------------------------------------- zero-level curve of f


def _as_minus_e(z):
    """z - (1 - e^{-z}) with a Taylor series for small z."""
    z = np.asarray(z, float)
    small = np.abs(z) < 1e-2
    zs = np.where(small, z, 0.0)
    series = zs**2 / 2 - zs**3 / 6 + zs**4 / 24 - zs**5 / 120 + zs**6 / 720
    return np.where(small, series, z + np.expm1(-np.where(small, 1.0, z)))


def alpha_curve(p: ProblemOU, s):
    """The rate alpha(s) < 0 with f(alpha(s), s) = 0 (f is affine in r)."""
    s = np.asarray(s, float)
    if np.any(s <= 0):
        raise DomainError("alpha needs s > 0")
    d = p.derived
    E = -np.expm1(-d.a * s)
    out = -d.b * _as_minus_e(d.a * s) / E - d.sigma**2 * E / (2 * d.a)
    return float(out) if out.ndim == 0 else out


def beta(p: ProblemOU, r):
    """Inverse of alpha: the time s > 0 with alpha(s) = r, defined for r < 0."""
    if np.ndim(r):
        return np.array([beta(p, float(v)) for v in np.ravel(r)]).reshape(np.shape(r))
    r = float(r)
    if not r < 0:
        raise DomainError(f"beta is defined only for r < 0, got {r}")
    lo, hi = 0.0, 1.0
    while alpha_curve(p, hi) > r:
        lo, hi = hi, 2 * hi
    if lo == 0.0:
        lo = hi
        while alpha_curve(p, lo) < r:
            lo /= 2
            if lo < 1e-300:
                return lo
    return brentq(lambda s: alpha_curve(p, s) - r, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# ---------------------------------------------------------------- bounds and constants


def _envelope_factor(d, r):
    return np.exp(-np.minimum((np.asarray(r, float) - d.b) / d.a, 0.0))


def value_bounds_ou(p: ProblemOU, r, x):
    """(lower, upper) sandwich for V.

    The upper bound is (xi/b) exp(-min((r-b)/a, 0)).  The lower bound is the
    value of the admissible strategy "pay xi while surplus lasts, then mu",
    which for xi <= mu is xi forever; its tail rate is therefore min(xi, mu).
    """
    d = p.derived
    upper = p.xi / d.b * _envelope_factor(d, r)
    lower = _two_rate_value(d, r, p.switch_time(x), p.xi, min(p.xi, p.mu))
    upper = np.broadcast_to(upper, np.shape(lower))
    if np.ndim(lower) == 0:
        return float(lower), float(upper)
    return lower, upper.copy()


def lipschitz_lambda(p: ProblemOU) -> float:
    d = p.derived
    a, b, s = d.a, d.b, d.sigma
    return s * (a + b) / b + a * (d.b_tilde - b) / b + (a + b) / b * (b + s**2 / (2 * a))


# ---------------------------------------------------------------- finite-difference solver


def _boundary_values(p: ProblemOU, r, x):
    if p.small_cap:
        return np.full(np.shape(x), analytic_value_small_xi_ou(p, r))
    return analytic_value_hat_ou(p, r, x)


class _Scheme:
    """Upwind discretization of the HJB generator for a fixed control field.

    With ``boundary="natural"`` every rate row is an unknown: the drift
    a(b_tilde - r) points into the domain at both rate edges, so the edge
    rows drop the diffusion term and use the inward one-sided difference.
    With ``boundary="anchored"`` the edge rows are Dirichlet data from the
    analytic candidate and the last surplus column uses the candidate slope.
    In the natural mode the last column (when xi > mu) only allows paying
    xi, whose negative surplus drift needs no data beyond the grid.
    """

    def __init__(self, p: ProblemOU, g: SolverGrid):
        d = p.derived
        self.p, self.g = p, g
        self.r, self.x = g.r, g.x
        self.hr = self.r[1] - self.r[0]
        self.hx = self.x[1] - self.x[0]
        self.nr, self.nx = g.n_r, g.n_x
        self.natural = g.boundary == "natural"
        diff = d.sigma_tilde**2 / 2
        drift = d.a * (d.b_tilde - self.r)
        up = diff / self.hr**2 + np.maximum(drift, 0.0) / self.hr
        down = diff / self.hr**2 + np.maximum(-drift, 0.0) / self.hr
        if self.natural:
            if not (drift[0] > 0 and drift[-1] < 0):
                raise ParameterError("natural rate boundaries need r_min < b_tilde < r_max")
            up[0], down[0] = drift[0] / self.hr, 0.0
            up[-1], down[-1] = 0.0, -drift[-1] / self.hr
            self.rows = np.arange(self.nr)
        else:
            self.low_bc = _boundary_values(p, self.r[0], self.x)
            self.high_bc = _boundary_values(p, self.r[-1], self.x)
            self.rows = np.arange(1, self.nr - 1)
        # monotone scheme: every off-diagonal coefficient is nonnegative
        if np.any(up < 0) or np.any(down < 0):
            raise ParameterError("scheme is not monotone on this grid")
        self.up, self.down = up, down
        self.pay = np.full(self.nx, p.xi)
        self.pay[0] = min(p.mu, p.xi)
        # columns whose control set is {pay} only
        self.forced = np.zeros(self.nx, bool)
        self.slope = None
        if p.small_cap:
            self.slope = np.zeros(self.nr)
        elif self.natural:
            self.forced[-1] = True
        else:
            self.slope = analytic_value_hat_ou_x(p, self.r, self.x[-1])
        self.ni = len(self.rows)

    def full(self, V_int):
        V = np.empty((self.nr, self.nx))
        if not self.natural:
            V[0], V[-1] = self.low_bc, self.high_bc
        V[self.rows] = V_int.reshape(self.ni, self.nx)
        return V

    def apply(self, V, c):
        """L_c V + c on the unknown rows, for a control field c of shape (ni, n_x)."""
        rows = self.rows
        r = self.r[rows, None]
        Vp = np.vstack([V[1:], V[-1:]])
        Vm = np.vstack([V[:1], V[:-1]])
        Vi = V[rows]
        out = (self.up[rows, None] * (Vp[rows] - Vi) + self.down[rows, None] * (Vm[rows] - Vi)
               - r * Vi + c)
        v = self.p.mu - c
        fwd = np.zeros_like(Vi)
        bwd = np.zeros_like(Vi)
        fwd[:, :-1] = (Vi[:, 1:] - Vi[:, :-1]) / self.hx
        bwd[:, 1:] = (Vi[:, 1:] - Vi[:, :-1]) / self.hx
        dx = np.where(v > 0, fwd, bwd)
        if self.slope is not None:
            dx[:, -1] = self.slope[rows]
        return out + v * dx

    def candidates(self, V):
        zero = self.apply(V, np.zeros((self.ni, self.nx)))
        zero[:, self.forced] = -np.inf
        pay = self.apply(V, np.broadcast_to(self.pay, (self.ni, self.nx)).copy())
        return zero, pay

    def system(self, c):
        """Sparse matrix and right-hand side of L_c V + c = 0."""
        ni, nx = self.ni, self.nx
        rows_, cols_, vals_ = [], [], []
        rhs = -np.asarray(c, float).copy()
        I = np.broadcast_to(self.rows[:, None], (ni, nx))
        J = np.broadcast_to(np.arange(nx)[None, :], (ni, nx))
        pos = np.arange(ni)[:, None]
        k = pos * nx + J
        up = np.broadcast_to(self.up[self.rows, None], (ni, nx))
        down = np.broadcast_to(self.down[self.rows, None], (ni, nx))
        diag = -(up + down) - self.r[self.rows, None]
        has_up = (pos < ni - 1) & (up > 0)
        has_dn = (pos > 0) & (down > 0)
        rows_.append(k[has_up]); cols_.append(k[has_up] + nx); vals_.append(up[has_up])
        rows_.append(k[has_dn]); cols_.append(k[has_dn] - nx); vals_.append(down[has_dn])
        if not self.natural:
            top = I == self.nr - 2
            rhs[top] -= (up * self.high_bc[None, :])[top]
            bottom = I == 1
            rhs[bottom] -= (down * self.low_bc[None, :])[bottom]
        v = self.p.mu - c
        last = J == nx - 1
        if self.slope is not None:
            rhs[last] -= (v * self.slope[self.rows, None])[last]
            interior = ~last
        else:
            interior = np.ones_like(last)
        if np.any((v < 0) & (J == 0)):
            raise ParameterError("control exceeds income at zero surplus")
        if np.any((v > 0) & last & interior):
            raise ParameterError("positive surplus drift at x_max needs boundary data")
        fw = (v > 0) & interior
        bw = (v < 0) & interior
        rows_.append(k[fw]); cols_.append(k[fw] + 1); vals_.append(v[fw] / self.hx)
        rows_.append(k[bw]); cols_.append(k[bw] - 1); vals_.append(-v[bw] / self.hx)
        diag = diag - np.where(fw, v, 0.0) / self.hx + np.where(bw, v, 0.0) / self.hx
        rows_.append(k.ravel()); cols_.append(k.ravel()); vals_.append(diag.ravel())
        n = ni * nx
        A = sp.csr_matrix((np.concatenate(vals_), (np.concatenate(rows_), np.concatenate(cols_))),
                          shape=(n, n))
        return A, rhs.ravel()


def solve_hjb_ou(p: ProblemOU, g: SolverGrid | None = None, *, initial_policy=None) -> ValueSurface:
    """Howard policy iteration on the upwind scheme.

    The control set is {0, xi} in the interior and {0, min(mu, xi)} at
    x = 0; boundary handling is described on :class:`SolverGrid`.
    Iteration starts from "always pay" and stops when the policy is stable
    and the sup-norm residual of the discrete HJB is below ``g.tol``.  If
    the policy cycles, value updates are damped by ``g.damping``.
    """
    g = g or SolverGrid.default(p)
    s = _Scheme(p, g)
    if initial_policy is None:
        c = np.broadcast_to(s.pay, (s.ni, s.nx)).copy()
    else:
        c = np.asarray(initial_policy, float)[s.rows].copy()
    seen = set()
    damped = False
    V_int = None
    history = []
    residual = math.inf
    for it in range(1, g.max_iter + 1):
        A, rhs = s.system(c)
        V_new = spsolve(A.tocsc(), rhs)
        if V_int is not None and damped:
            V_new = g.damping * V_new + (1 - g.damping) * V_int
        V_int = V_new
        V = s.full(V_int)
        zero, pay = s.candidates(V)
        scale = 1e-12 * max(1.0, float(np.abs(V).max()))
        better = np.where(pay > zero + scale, s.pay[None, :], np.where(zero > pay + scale, 0.0, c))
        residual = float(np.abs(np.maximum(zero, pay)).max())
        history.append(residual)
        if np.array_equal(better, c) and residual < g.tol:
            break
        key = better.tobytes()
        if key in seen and not np.array_equal(better, c):
            damped = True
        seen.add(key)
        c = better
    else:
        raise ConvergenceError(
            f"policy iteration did not converge in {g.max_iter} iterations (residual {residual:.3e})",
            residual=residual, iterations=g.max_iter,
        )
    policy = np.empty((s.nr, s.nx))
    policy[s.rows] = c
    if not s.natural:
        policy[0] = policy[-1] = s.pay
    return ValueSurface(s.r, s.x, V, policy, residual, it, damped, tuple(history))


def policy_value_ou(p: ProblemOU, g: SolverGrid | None = None, policy=None) -> np.ndarray:
    """Discrete value of a fixed control field on the solver grid.

    ``policy`` has shape ``(n_r, n_x)``; the default pays the maximal rate
    everywhere, the grid counterpart of the analytic candidate.  By the
    comparison principle of the monotone scheme, the optimal grid value
    dominates this value at every node.
    """
    g = g or SolverGrid.default(p)
    s = _Scheme(p, g)
    if policy is None:
        c = np.broadcast_to(s.pay, (s.ni, s.nx)).copy()
    else:
        c = np.asarray(policy, float)[s.rows].copy()
    A, rhs = s.system(c)
    return s.full(spsolve(A.tocsc(), rhs))


def hjb_residual_ou(p: ProblemOU, vs: ValueSurface, g: SolverGrid, interior: int = 2) -> float:
    """Sup-norm of the discrete HJB residual away from the outer ``interior`` nodes."""
    s = _Scheme(p, g)
    zero, pay = s.candidates(vs.values)
    res = np.full((s.nr, s.nx), np.nan)
    res[s.rows] = np.abs(np.maximum(zero, pay))
    return float(np.nanmax(res[interior:s.nr - interior, interior:s.nx - interior]))


# ---------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class RegularityReport:
    increasing_x: bool
    concave_x: bool
    decreasing_r: bool
    convex_r: bool
    lipschitz_r: bool
    lipschitz_x: bool
    tol_x: float
    tol_r: float
    worst: dict

    @property
    def signs_ok(self) -> bool:
        return self.increasing_x and self.concave_x and self.decreasing_r and self.convex_r

    @property
    def ok(self) -> bool:
        return self.signs_ok and self.lipschitz_r and self.lipschitz_x

    def to_dict(self) -> dict:
        return {
            "increasing_x": self.increasing_x, "concave_x": self.concave_x,
            "decreasing_r": self.decreasing_r, "convex_r": self.convex_r,
            "lipschitz_r": self.lipschitz_r, "lipschitz_x": self.lipschitz_x,
            "tol_x": self.tol_x, "tol_r": self.tol_r, "worst": dict(self.worst),
        }


def verify_regularity(p: ProblemOU, vs: ValueSurface, tol_factor: float = 10.0) -> RegularityReport:
    """Sign and Lipschitz checks on difference quotients of a solved surface.

    Monotonicity and curvature are judged on difference quotients with
    tolerance ``tol_factor`` times the grid spacing.  The Lipschitz checks use
    the explicit constants: in r the rate (xi/(b a)) e^{-min((r-b)/a,0)}, in x
    (xi/(mu (a+b))) (max(r-b,0) + Lambda) e^{-min((r-b)/a,0)}.
    """
    d = p.derived
    V, hr, hx = vs.values, vs.h_r, vs.h_x
    tol_x, tol_r = tol_factor * hx, tol_factor * hr
    Vx = np.diff(V, axis=1) / hx
    Vxx = np.diff(V, 2, axis=1) / hx**2
    Vr = np.diff(V, axis=0) / hr
    Vrr = np.diff(V, 2, axis=0) / hr**2
    r_pair = vs.r[:-1]
    env = _envelope_factor(d, vs.r)
    lip_r = (p.xi / (d.b * d.a)) * _envelope_factor(d, r_pair)[:, None]
    ratio_r = np.abs(Vr) / lip_r
    if p.mu > 0:
        lam = lipschitz_lambda(p)
        lip_x = (p.xi / (p.mu * (d.a + d.b))) * (np.maximum(vs.r - d.b, 0.0) + lam) * env
        ratio_x = np.abs(Vx) / lip_x[:, None]
    else:
        ratio_x = np.zeros_like(Vx)
    worst = {
        "min_Vx": float(Vx.min()), "max_Vxx": float(Vxx.max()),
        "max_Vr": float(Vr.max()), "min_Vrr": float(Vrr.min()),
        "max_ratio_r": float(ratio_r.max()), "max_ratio_x": float(ratio_x.max()),
    }
    return RegularityReport(
        increasing_x=bool(Vx.min() >= -tol_x),
        concave_x=bool(Vxx.max() <= tol_x),
        decreasing_r=bool(Vr.max() <= tol_r),
        convex_r=bool(Vrr.min() >= -tol_r),
        lipschitz_r=bool(ratio_r.max() <= 1.0),
        lipschitz_x=bool(p.mu == 0 or ratio_x.max() <= 1.0),
        tol_x=tol_x, tol_r=tol_r, worst=worst,
    )


def extract_free_boundary(p: ProblemOU, vs: ValueSurface):
    """Per interior rate row: the smallest positive surplus node paying xi.

    Returns a list of dicts with the numerical threshold and, for r < 0, the
    curve (xi - mu) beta(r) below which the xi-then-mu candidate has slope
    above one.  NaN marks rows with no paying node.
    """
    rows = []
    for i in range(1, len(vs.r) - 1):
        r = float(vs.r[i])
        paying = np.nonzero(vs.policy[i, 1:] >= p.xi)[0]
        x_b = float(vs.x[1 + paying[0]]) if paying.size else math.nan
        ref = math.nan
        if r < 0 and not p.small_cap:
            ref = (p.xi - p.mu) * beta(p, r)
        rows.append({"r": r, "x_boundary": x_b, "beta_x": ref})
    return rows


def grid_error_estimate(p: ProblemOU, g: SolverGrid, fine: ValueSurface | None = None):
    """|V_h - V_2h| on the fine grid nodes: a first-order error proxy."""
    fine = fine or solve_hjb_ou(p, g)
    coarse = solve_hjb_ou(p, g.coarsened())
    R, X = np.meshgrid(fine.r, fine.x, indexing="ij")
    return np.abs(fine.values - coarse.interpolate(R, X))


def mc_validate_policy(p: ProblemOU, vs: ValueSurface, states, seeds, n_paths: int = 100_000,
                       dt: float = 0.01, se_budget: float = 0.2) -> list[McEstimate]:
    """Monte Carlo value of the surface's feedback policy at each (r, x) state.

    The horizon is chosen per state so that the analytic tail bound stays
    below ``se_budget`` times a conservative standard-error guess.
    """
    d = p.derived
    table = vs.feedback()
    out = []
    for (r, x), seed in zip(states, seeds):
        upper = value_bounds_ou(p, r, x)[1]
        se_guess = max(upper / math.sqrt(n_paths) * 0.05, 1e-6)
        S = 5.0
        while p.xi * float(tail_envelope(d, r, S)) > se_budget * se_guess:
            S += 5.0
        cfg = McConfig(seed=int(seed), n_paths=n_paths, dt=dt, horizon=S)
        est = evaluate_policy(d, table, float(x), cfg, mu=p.mu, r0=float(r))
        if est.tail_bound > se_budget * max(est.std_error, 1e-300):
            warnings.warn(f"tail bound {est.tail_bound:.2e} exceeds {se_budget} SE at state {(r, x)}")
        out.append(est)
    return out
