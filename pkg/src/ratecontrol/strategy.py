"""Open-loop consumption plans: piecewise-constant rates plus optional lump payouts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError


@dataclass(frozen=True)
class PiecewiseStrategy:
    """Consumption rate ``rate`` on each ``[start, end)`` and lump payouts ``(time, amount)``.

    Segments are sorted and contiguous; the last one may end at ``inf`` for
    infinite-horizon plans.
    """

    segments: tuple[tuple[float, float, float], ...]
    lumps: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        segs = tuple((float(a), float(b), float(c)) for a, b, c in self.segments)
        for (a0, b0, _), (a1, _, _) in zip(segs, segs[1:]):
            if abs(b0 - a1) > 1e-12:
                raise ValueError(f"segments not contiguous at {b0} -> {a1}")
        if any(b < a or c < 0 for a, b, c in segs):
            raise ValueError("segments need start <= end and rate >= 0")
        if any(m < 0 for _, m in self.lumps):
            raise ValueError("lump amounts must be >= 0")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "lumps", tuple((float(s), float(m)) for s, m in self.lumps))

    @classmethod
    def build(cls, pieces, lumps=()) -> "PiecewiseStrategy":
        """Drop empty pieces and merge neighbours with equal rates."""
        merged: list[list[float]] = []
        for a, b, c in pieces:
            if b - a <= 1e-15:
                continue
            if merged and merged[-1][2] == c and abs(merged[-1][1] - a) <= 1e-12:
                merged[-1][1] = b
            else:
                merged.append([a, b, c])
        if not merged and pieces:
            a = pieces[0][0]
            merged = [[a, a, 0.0]]
        lumps = tuple((s, m) for s, m in lumps if m > 0)
        return cls(tuple(tuple(m) for m in merged), lumps)

    @property
    def start(self) -> float:
        return self.segments[0][0]

    @property
    def end(self) -> float:
        return self.segments[-1][1]

    def breakpoints(self) -> list[float]:
        pts = {a for a, _, _ in self.segments} | {b for _, b, _ in self.segments}
        pts |= {s for s, _ in self.lumps}
        return sorted(p for p in pts if math.isfinite(p))

    def rate_at(self, s):
        """Rate in force at time(s) ``s`` (right-continuous); 0 outside the plan."""
        s = np.asarray(s, float)
        out = np.zeros_like(s)
        for a, b, c in self.segments:
            out = np.where((s >= a) & (s < b), c, out)
        return float(out) if out.ndim == 0 else out

    def consumed(self, s: float) -> float:
        """Cumulative payout on [start, s], lumps at times <= s included."""
        total = 0.0
        for a, b, c in self.segments:
            if s > a:
                total += c * (min(s, b) - a)
        total += sum(m for tau, m in self.lumps if tau <= s)
        return total

    def surplus(self, s: float, x: float, mu: float) -> float:
        return x + mu * (s - self.start) - self.consumed(s)

    def check_admissible(self, x: float, mu: float, xi: float = math.inf, tol: float = 1e-9) -> None:
        """Raise AdmissibilityError unless rates stay in [0, xi] and the surplus stays >= 0."""
        if any(c > xi + tol for _, _, c in self.segments):
            raise AdmissibilityError(f"rate above the cap {xi}")
        # surplus is piecewise linear, so breakpoints (after lumps) suffice
        for s in self.breakpoints():
            if self.surplus(s, x, mu) < -tol:
                raise AdmissibilityError(f"surplus negative at s={s}")

    def is_admissible(self, x: float, mu: float, xi: float = math.inf, tol: float = 1e-9) -> bool:
        try:
            self.check_admissible(x, mu, xi, tol)
        except AdmissibilityError:
            return False
        return True
