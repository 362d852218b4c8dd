"""Multi-well potentials ``V`` and the penalisation weights built from them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .field import DIM, GridSpec


@dataclass(frozen=True)
class Well:
    center: Tuple[float, float, float]
    radius: float
    depth: float  # m_i = inf_{O^i} V

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != DIM:
            raise ValueError("well center must be a 3-vector")
        if not self.radius > 0:
            raise ValueError(f"well radius must be positive, got {self.radius}")
        if not self.depth > 0:
            raise ValueError(f"well depth m_i must be positive, got {self.depth}")


def bump(s, power: float = 2.0):
    """``(1 - s^power)^2`` on ``s < 1``, zero outside; equals 1 only at ``s = 0``."""
    s = np.asarray(s, dtype=float)
    return np.where(s < 1, (1 - np.minimum(s, 1) ** power) ** 2, 0.0)


@dataclass(frozen=True)
class PotentialSpec:
    """``V(x) = 1 + (v_out - 1) Π_i (1 - w_i bump(|x - c_i| / r_i))``.

    ``w_i = (v_out - m_i) / (v_out - 1)`` so that ``V(c_i) = m_i``, ``V = v_out``
    on and outside every ``∂O^i``, and the minimum set of well ``i`` is
    ``{c_i}``.  ``O^i`` is the open ball ``B(c_i, r_i)``.
    """

    wells: Tuple[Well, ...]
    v_out: float = 2.0
    bump_power: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "wells", tuple(self.wells))
        if not self.wells:
            raise ValueError("potential needs at least one well")
        if not self.v_out > 1:
            raise ValueError(f"v_out must exceed 1, got {self.v_out}")

    @property
    def k(self) -> int:
        return len(self.wells)

    @property
    def centers(self) -> np.ndarray:
        return np.array([w.center for w in self.wells])

    def __call__(self, x, y, z) -> np.ndarray:
        prod = 1.0
        for w in self.wells:
            c = w.center
            s = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / w.radius
            weight = (self.v_out - w.depth) / (self.v_out - 1)
            prod = prod * (1 - weight * bump(s, self.bump_power))
        return 1 + (self.v_out - 1) * prod

    def in_well(self, x, y, z, i: int = None) -> np.ndarray:
        """Indicator of ``O`` (or of ``O^i`` when ``i`` is given)."""
        wells = self.wells if i is None else (self.wells[i],)
        inside = False
        for w in wells:
            c = w.center
            inside = inside | ((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2 < w.radius**2)
        return np.broadcast_to(inside, np.broadcast(x, y, z).shape)

    def well_of(self, point: Sequence[float]) -> int:
        """Index of the well containing ``point``, or -1."""
        p = np.asarray(point, dtype=float)
        for i, w in enumerate(self.wells):
            if np.linalg.norm(p - w.center) < w.radius:
                return i
        return -1

    def dist_to_minimum_set(self, point: Sequence[float], i: int) -> float:
        return float(np.linalg.norm(np.asarray(point, dtype=float) - self.wells[i].center))

    def delta(self, fraction: float = 0.1) -> float:
        """``fraction * min{dist(M, O^c), min_{i != j} dist(O^i, O^j)}``."""
        d = min(w.radius for w in self.wells)
        for i, a in enumerate(self.wells):
            for b in self.wells[i + 1:]:
                d = min(d, np.linalg.norm(np.subtract(a.center, b.center)) - a.radius - b.radius)
        return fraction * d

    def check(self, grid: GridSpec = None, n_sphere: int = 400) -> dict:
        """Numerical (V1)/(V2) checks.

        (V1): the minimum of ``V`` over the grid nodes and the well centres is
        within 1e-6 of 1 and nothing falls below 1.  (V2): wells pairwise
        disjoint and ``m_i`` strictly below ``V`` sampled on ``∂O^i``.
        """
        pts = [self.centers[:, j] for j in range(DIM)]
        vmin = float(np.min(self(*pts)))
        if grid is not None:
            X, Y, Z = grid.coords
            vmin = min(vmin, float(self(X, Y, Z).min()))
        v1 = abs(vmin - 1) <= 1e-6 and vmin >= 1 - 1e-12

        disjoint = True
        for i, a in enumerate(self.wells):
            for b in self.wells[i + 1:]:
                if np.linalg.norm(np.subtract(a.center, b.center)) <= a.radius + b.radius:
                    disjoint = False
        sphere = fibonacci_sphere(n_sphere)
        margins = []
        for w in self.wells:
            pts = np.asarray(w.center) + w.radius * sphere
            margins.append(float(np.min(self(pts[:, 0], pts[:, 1], pts[:, 2]))) - w.depth)
        v2 = disjoint and all(m > 0 for m in margins)
        return {"V1": bool(v1), "V2": bool(v2), "inf_V": vmin, "boundary_margins": margins}


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5**0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], -1)


PRESETS = {
    "single_well": lambda: PotentialSpec((Well((0.0, 0.0, 0.0), 2.0, 1.0),)),
    "double_well": lambda: PotentialSpec((Well((-2.5, 0.0, 0.0), 2.0, 1.0),
                                          Well((2.5, 0.0, 0.0), 2.0, 1.2))),
    "triple_well": lambda: PotentialSpec((Well((-2.5, 0.0, 0.0), 2.0, 1.0),
                                          Well((2.5, 0.0, 0.0), 2.0, 1.2),
                                          Well((0.0, 4.5, 0.0), 2.0, 1.4))),
}


def preset(name: str, wells: List[dict] = None, **kw) -> PotentialSpec:
    """Named potential; ``wells`` (list of ``{center, radius, depth}``) overrides the layout."""
    if wells is not None:
        return PotentialSpec(tuple(Well(tuple(w["center"]), w["radius"], w["depth"]) for w in wells), **kw)
    try:
        pot = PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown potential preset {name!r}; expected one of {sorted(PRESETS)}") from None
    if kw:
        pot = PotentialSpec(pot.wells, **kw)
    return pot


@dataclass(frozen=True)
class PenalizationSpec:
    epsilon: float
    mu: float = 2.0
    threshold: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive (mu > 0), got {self.mu}")


def _shifted(grid: GridSpec, epsilon: float, offset):
    o = (0.0, 0.0, 0.0) if offset is None else offset
    X, Y, Z = grid.coords
    return epsilon * (X + o[0]), epsilon * (Y + o[1]), epsilon * (Z + o[2])


def build_chi(grid: GridSpec, pot: PotentialSpec, pen: PenalizationSpec, i: int = None,
              offset: Sequence[float] = None) -> np.ndarray:
    """``χ_ε`` (or ``χ_ε^i``): 0 where ``εx`` lies in ``O`` (``O^i``), ``ε^{-μ}`` elsewhere.

    ``offset`` places the grid origin at ``x = offset`` (used for local windows).
    """
    inside = pot.in_well(*_shifted(grid, pen.epsilon, offset), i)
    return np.where(inside, 0.0, pen.epsilon ** (-pen.mu))


def scaled_potential(grid: GridSpec, pot: PotentialSpec, epsilon: float,
                     offset: Sequence[float] = None) -> np.ndarray:
    """``V_ε(x) = V(εx)`` on the grid nodes."""
    return np.broadcast_to(pot(*_shifted(grid, epsilon, offset)), grid.shape).copy()
