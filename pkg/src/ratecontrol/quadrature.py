"""Integrals of the bond-price curve s -> exp(f(r, s)).

The integrand is entire, so a composite Gauss-Legendre rule on fixed panels
is accurate to rounding level and, unlike adaptive schemes, depends smoothly
on the integration limits.  That smoothness matters: values built from these
integrals are differentiated numerically downstream.
"""

from __future__ import annotations

import math

import numpy as np

from .vasicek import DerivedParams, log_discount

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(20)


def _panel_width(d: DerivedParams) -> float:
    return 0.25 / max(1.0, d.a)


def _gl(func, lo, hi):
    """Gauss-Legendre on [lo, hi] for arrays of limits (one panel each)."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[..., None] + half[..., None] * _NODES
    return half * np.sum(_WEIGHTS * func(pts), axis=-1)


class BondIntegral:
    """Antiderivative F(s) = int_0^s exp(f(r, u)) du for fixed r on [0, s_max]."""

    def __init__(self, d: DerivedParams, r: float | None = None, s_max: float = 1.0):
        self.d = d
        self.r = d.r0 if r is None else float(r)
        self.h = _panel_width(d)
        n = max(1, math.ceil(s_max / self.h)) + 1
        edges = self.h * np.arange(n + 1)
        panels = _gl(self._integrand, edges[:-1], edges[1:])
        self._cum = np.concatenate([[0.0], np.cumsum(panels)])
        self.s_max = edges[-1]

    def _integrand(self, s):
        return np.exp(log_discount(self.d, self.r, s))

    def __call__(self, s):
        s = np.asarray(s, float)
        if np.any(s < 0) or np.any(s > self.s_max):
            raise ValueError(f"s outside [0, {self.s_max}]")
        k = np.minimum(np.floor(s / self.h).astype(int), len(self._cum) - 2)
        out = self._cum[k] + _gl(self._integrand, k * self.h, s)
        return float(out) if out.ndim == 0 else out

    def between(self, lo, hi):
        """int_lo^hi exp(f(r, u)) du."""
        return self(hi) - self(lo)


def tail_envelope(d: DerivedParams, r, s):
    """Bound on int_s^inf exp(f(r, u)) du using f <= -b u - min((r-b)/a, 0); needs b > 0."""
    if d.b <= 0:
        return math.inf
    r = np.asarray(r, float)
    return np.exp(-d.b * s - np.minimum((r - d.b) / d.a, 0.0)) / d.b


def truncation_horizon(d: DerivedParams, r, tol: float = 1e-15) -> float:
    """Smallest S (rounded up) with tail_envelope(S) <= tol for every r given."""
    if d.b <= 0:
        raise ValueError("infinite-horizon integrals need b > 0")
    r_lo = float(np.min(r))
    shift = -min((r_lo - d.b) / d.a, 0.0)
    return max(1.0, (shift - math.log(tol * d.b)) / d.b)


def integral_to_infinity(d: DerivedParams, r, lower=0.0, tol: float = 1e-15):
    """int_lower^inf exp(f(r, s)) ds, vectorized over r and lower (broadcast)."""
    r = np.asarray(r, float)
    lower = np.asarray(lower, float)
    S = truncation_horizon(d, r, tol) + float(np.max(lower))
    h = _panel_width(d)
    n = math.ceil(S / h)
    edges = h * np.arange(n + 1)
    rr = r[..., None]
    pts = 0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 * h * _NODES
    vals = np.exp(log_discount(d, rr[..., None], pts))
    panels = 0.5 * h * np.sum(_WEIGHTS * vals, axis=-1)
    cum = np.concatenate([np.zeros(r.shape + (1,)), np.cumsum(panels, axis=-1)], axis=-1)
    total = cum[..., -1]
    # int_0^lower via panel lookup plus a partial panel
    k = np.minimum(np.floor(lower / h).astype(int), n - 1)
    kb = np.broadcast_to(k, np.broadcast_shapes(k.shape, r.shape))
    lb = np.broadcast_to(lower, kb.shape)
    rb = np.broadcast_to(r, kb.shape)
    head = np.take_along_axis(np.broadcast_to(cum, kb.shape + cum.shape[-1:]), kb[..., None], -1)[..., 0]
    half = 0.5 * (lb - kb * h)
    mid = 0.5 * (lb + kb * h)
    ppts = mid[..., None] + half[..., None] * _NODES
    head = head + half * np.sum(_WEIGHTS * np.exp(log_discount(d, rb[..., None], ppts)), axis=-1)
    out = np.broadcast_to(total, kb.shape) - head
    return float(out) if out.ndim == 0 else out
