"""Infinite-horizon consumption discounted by exp(-r_t) with r_t = r + m t + sigma W_t.

Writing ``k = m - sigma^2/2`` (required positive), ``E[exp(-r_s)] = exp(-r - k s)``
and every value below is a closed form in ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "GbmParams",
    "expected_discount_gbm",
    "value_gbm_small_xi",
    "value_gbm_large_xi",
    "value_gbm_unrestricted",
    "gbm_partials",
    "hjb_residual_gbm",
]


@dataclass(frozen=True)
class GbmParams:
    m: float
    sigma: float
    r0: float = 0.0
    mu: float = 1.0
    xi: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if not self.m > self.sigma**2 / 2:
            raise ParameterError(
                f"well-definedness requires m > sigma^2/2 (m={self.m}, sigma^2/2={self.sigma**2 / 2})"
            )
        if self.mu < 0 or not self.xi > 0:
            raise ParameterError("need mu >= 0 and xi > 0")

    @property
    def k(self) -> float:
        return self.m - self.sigma**2 / 2


def _r(p, r):
    return p.r0 if r is None else r


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def expected_discount_gbm(p: GbmParams, s, r=None):
    """E[exp(-r_s)] given r_0 = r."""
    s = np.asarray(s, float)
    if np.any(s < 0):
        raise DomainError("s must be >= 0")
    return _out(np.exp(-np.asarray(_r(p, r), float) - p.k * s))


def value_gbm_small_xi(p: GbmParams, r=None):
    """Paying xi forever: xi e^{-r} / k (needs xi <= mu; independent of x)."""
    if p.xi > p.mu:
        raise ParameterError(f"needs xi <= mu (xi={p.xi}, mu={p.mu})")
    return _out(p.xi * np.exp(-np.asarray(_r(p, r), float)) / p.k)


def _switch_decay(p, x):
    # e^{-k tau} with tau = x / (xi - mu) the time the surplus runs out
    return np.exp(-p.k * np.asarray(x, float) / (p.xi - p.mu))


def value_gbm_large_xi(p: GbmParams, x, r=None):
    """Pay xi until the surplus is gone, then mu forever."""
    if not p.mu < p.xi < math.inf:
        raise ParameterError(f"needs mu < xi < inf (xi={p.xi}, mu={p.mu})")
    x = np.asarray(x, float)
    if np.any(x < 0):
        raise DomainError("x must be >= 0")
    q = _switch_decay(p, x)
    return _out(np.exp(-np.asarray(_r(p, r), float)) / p.k * (p.xi * (1 - q) + p.mu * q))


def value_gbm_unrestricted(p: GbmParams, x, r=None):
    """Immediate lump x, then rate mu forever."""
    x = np.asarray(x, float)
    if np.any(x < 0):
        raise DomainError("x must be >= 0")
    return _out(np.exp(-np.asarray(_r(p, r), float)) * (x + p.mu / p.k))


def gbm_partials(p: GbmParams, r, x, kind: str):
    """(V, V_x, V_r, V_rr) of the closed form ``kind`` in {small, large, unrestricted}."""
    r = np.asarray(r, float)
    x = np.asarray(x, float)
    if kind == "small":
        V = value_gbm_small_xi(p, r) * np.ones_like(x)
        Vx = np.zeros_like(V)
    elif kind == "large":
        V = value_gbm_large_xi(p, x, r)
        Vx = np.exp(-r) * _switch_decay(p, x)
    elif kind == "unrestricted":
        V = value_gbm_unrestricted(p, x, r)
        Vx = np.exp(-r) * np.ones_like(x)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    # every closed form is e^{-r} times a function of x
    return V, Vx, -V, V


def _kind(p: GbmParams) -> str:
    if math.isinf(p.xi):
        return "unrestricted"
    return "small" if p.xi <= p.mu else "large"


def hjb_residual_gbm(p: GbmParams, r, x, kind: str | None = None):
    """Residual of mu V_x + m V_r + sigma^2/2 V_rr + sup_{0<=c<=xi} c (e^{-r} - V_x).

    For unrestricted payments the variational form
    max(mu V_x + m V_r + sigma^2/2 V_rr, e^{-r} - V_x) is used.
    """
    kind = kind or _kind(p)
    V, Vx, Vr, Vrr = gbm_partials(p, r, x, kind)
    gen = p.mu * Vx + p.m * Vr + 0.5 * p.sigma**2 * Vrr
    gap = np.exp(-np.asarray(r, float)) - Vx
    if kind == "unrestricted":
        return _out(np.maximum(gen, gap))
    return _out(gen + p.xi * np.maximum(gap, 0.0))
