"""Vasicek / Ornstein-Uhlenbeck discounting primitives.

The short rate follows

    dr_t = a (b_tilde - r_t) dt + sigma_tilde dW_t,

and the zero-coupon bond price with maturity ``s`` is ``exp(f(r, s))`` with

    f(r, s) = -b s - (r - b)/a (1 - e^{-as}) - sigma^2/(2 a^2) (1 - e^{-as})^2

in the reparameterized coordinates ``sigma = sigma_tilde / sqrt(2a)`` and
``b = b_tilde - sigma_tilde^2 / (2 a^2)``.  Every formula below works in
those coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "VasicekParams",
    "DerivedParams",
    "reparameterize",
    "log_discount",
    "bond_price",
    "f_time_derivative",
    "conditional_bond_price",
]


@dataclass(frozen=True)
class VasicekParams:
    """Short-rate parameters in the original (sigma_tilde, b_tilde) form."""

    a: float
    sigma_tilde: float
    b_tilde: float
    r0: float = 0.0

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ParameterError(f"mean-reversion speed a must be > 0, got {self.a}")
        if not self.sigma_tilde > 0:
            raise ParameterError(f"volatility sigma_tilde must be > 0, got {self.sigma_tilde}")


@dataclass(frozen=True)
class DerivedParams:
    """Reparameterized pair (sigma, b) together with a and the initial rate."""

    a: float
    sigma: float
    b: float
    r0: float = 0.0

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ParameterError(f"mean-reversion speed a must be > 0, got {self.a}")
        if not self.sigma > 0:
            raise ParameterError(f"volatility sigma must be > 0, got {self.sigma}")

    @property
    def sigma_tilde(self) -> float:
        return self.sigma * math.sqrt(2.0 * self.a)

    @property
    def b_tilde(self) -> float:
        # sigma_tilde^2 / (2 a^2) == sigma^2 / a
        return self.b + self.sigma**2 / self.a

    def with_r0(self, r0: float) -> "DerivedParams":
        return DerivedParams(self.a, self.sigma, self.b, r0)

    def original(self) -> VasicekParams:
        return VasicekParams(self.a, self.sigma_tilde, self.b_tilde, self.r0)


def reparameterize(p: VasicekParams) -> DerivedParams:
    """Map (a, sigma_tilde, b_tilde, r0) to the (sigma, b) coordinates."""
    sigma = p.sigma_tilde / math.sqrt(2.0 * p.a)
    b = p.b_tilde - p.sigma_tilde**2 / (2.0 * p.a**2)
    return DerivedParams(a=p.a, sigma=sigma, b=b, r0=p.r0)


def _check_time(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise DomainError("time argument s must be >= 0")
    return s


def _one_minus_exp(a, s):
    # 1 - e^{-as} without cancellation at small as
    return -np.expm1(-a * s)


def _rate(d, r):
    return d.r0 if r is None else r


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def log_discount(d: DerivedParams, r=None, s=0.0):
    """Log bond price f(r, s).  ``r`` defaults to ``d.r0``; broadcasts over arrays."""
    s = _check_time(s)
    r = np.asarray(_rate(d, r), dtype=float)
    e = _one_minus_exp(d.a, s)
    out = -d.b * s - (r - d.b) / d.a * e - d.sigma**2 / (2.0 * d.a**2) * e**2
    return _scalar(out)


def bond_price(d: DerivedParams, r=None, s=0.0):
    """Zero-coupon bond price E[exp(-int_0^s r_u du)] = exp(f(r, s))."""
    return _scalar(np.exp(log_discount(d, r, s)))


def f_time_derivative(d: DerivedParams, r=None, s=0.0):
    """Analytic d/ds f(r, s)."""
    s = _check_time(s)
    r = np.asarray(_rate(d, r), dtype=float)
    k = d.sigma**2 / d.a
    q = np.exp(-d.a * s)
    out = -d.b - (r - d.b + k) * q + k * q * q
    return _scalar(out)


def conditional_bond_price(d: DerivedParams, r, s, y):
    """Theta(r, s, y) = E[exp(-int_0^s r_u du) | r_0 = r, r_s = y]."""
    s = _check_time(s)
    th = np.tanh(d.a * s / 2.0) / d.a
    # summing the two offsets first keeps Theta(r, s, y) == Theta(y, s, r) bit-for-bit
    offsets = (np.asarray(r, float) - d.b) + (np.asarray(y, float) - d.b)
    out = np.exp(-d.b * s - offsets * th)
    return _scalar(out)
