"""Nonlinearities ``f`` and their primitives ``F`` with the sign convention
``f(t) = 0`` for ``t <= 0``.

Two presets:

``power``    ``F(s) = s_+^p / p``, ``f(s) = s_+^{p-1}``; admissible for
             ``2 < p < 3 + α`` in three dimensions.
``bl_demo``  ``f(s) = s_+^3 / (1 + s_+^2)``, asymptotically linear, so it
             violates the Ambrosetti-Rabinowitz condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .field import DIM

KINDS = ("power", "bl_demo")

# sample points for the growth checks
SMALL_T = (1e-3, 1e-4, 1e-5)
LARGE_T = (1e2, 1e3, 1e4)
WITNESS_T = np.logspace(-3, 3, 61)


@dataclass
class HypothesisReport:
    f1: bool
    f2: bool
    f3: bool
    witness: float
    details: Dict[str, list] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.f1 and self.f2 and self.f3


@dataclass(frozen=True)
class Nonlinearity:
    kind: str = "power"
    p: float = 3.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity {self.kind!r}; expected one of {KINDS}")
        if self.kind == "power" and not self.p >= 2:
            # f'(0) must exist for the linearisation
            raise ValueError(f"power nonlinearity needs p >= 2, got {self.p}")

    @classmethod
    def power(cls, p: float) -> "Nonlinearity":
        return cls("power", float(p))

    @classmethod
    def bl_demo(cls) -> "Nonlinearity":
        return cls("bl_demo")

    def f(self, s):
        s = np.maximum(s, 0.0)
        if self.kind == "power":
            return s ** (self.p - 1)
        s2 = s * s
        return s * s2 / (1 + s2)

    def F(self, s):
        s = np.maximum(s, 0.0)
        if self.kind == "power":
            return s**self.p / self.p
        s2 = s * s
        # s^2/2 - log(1+s^2)/2 cancels catastrophically near 0; use the series there
        series = s2 * s2 * (0.25 - s2 / 6 + s2 * s2 / 8)
        with np.errstate(divide="ignore", invalid="ignore"):
            closed = 0.5 * (s2 - np.log1p(s2))
        return np.where(s2 < 1e-4, series, closed)

    def df(self, s):
        s = np.maximum(s, 0.0)
        if self.kind == "power":
            return (self.p - 1) * s ** (self.p - 2)
        s2 = s * s
        return s2 * (3 + s2) / (1 + s2) ** 2

    def critical_exponent(self, alpha: float) -> float:
        """Growth exponent ``(α+2)/(N-2)`` that ``f`` must stay below at infinity."""
        return (alpha + 2) / (DIM - 2)

    def check_hypotheses(self, alpha: float) -> HypothesisReport:
        """Numerical checks of the small-, large-amplitude and positivity conditions.

        (F1) ``f(t)/t`` strictly decreases as ``t`` shrinks through ``SMALL_T``
        with a positive log-log slope; (F2) the same for
        ``f(t)/t^{(α+2)/(N-2)}`` as ``t`` grows through ``LARGE_T``; (F3) some
        sampled ``s_0`` has ``F(s_0) > 0``.
        """
        small = np.array(SMALL_T)
        r1 = self.f(small) / small
        f1 = bool(np.all(np.diff(r1) < 0) and r1[0] > 0
                  and np.log(r1[0] / r1[-1]) / np.log(small[0] / small[-1]) > 1e-3)

        large = np.array(LARGE_T)
        r2 = self.f(large) / large ** self.critical_exponent(alpha)
        f2 = bool(np.all(np.diff(r2) < 0)
                  and np.log(r2[0] / r2[-1]) / np.log(large[-1] / large[0]) > 1e-3)

        pos = WITNESS_T[self.F(WITNESS_T) > 0]
        witness = float(pos[0]) if pos.size else float("nan")
        return HypothesisReport(f1, f2, bool(pos.size), witness,
                                {"f1_ratios": r1.tolist(), "f2_ratios": r2.tolist()})

    def validate(self, alpha: float) -> HypothesisReport:
        rep = self.check_hypotheses(alpha)
        if not rep.ok:
            failed = [name for name, ok in (("F1", rep.f1), ("F2", rep.f2), ("F3", rep.f3)) if not ok]
            raise ValueError(f"{self} violates {', '.join(failed)} at alpha={alpha}")
        return rep
