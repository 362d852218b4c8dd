"""Standalone verifiers: HLS bound, exponential decay fits and cubic symmetry."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .field import DIM, GridSpec, ScalarField
from .riesz import PeriodicImageWarning, RieszOperator, riesz_constant

SPHERE_AREA = 4 * np.pi  # |S^2|


def hls_constant_bound(s: float, r: float, alpha: float, rtol: float = 1e-9) -> float:
    """Upper bound for the sharp constant of the bilinear form with kernel
    ``|x-y|^{-(N-α)}``, valid when ``1/s + 1/r = 1 + α/N``."""
    if not (s > 1 and r > 1):
        raise ValueError(f"need s, r > 1, got s={s}, r={r}")
    if not 0 < alpha < DIM:
        raise ValueError(f"alpha must lie in (0, {DIM}), got {alpha}")
    if abs(1 / s + 1 / r - (1 + alpha / DIM)) > rtol:
        raise ValueError(f"exponents violate 1/s + 1/r = 1 + alpha/{DIM}: "
                         f"1/{s} + 1/{r} != {1 + alpha / DIM}")
    lam = 1 - alpha / DIM
    bracket = (lam / (1 - 1 / s)) ** lam + (lam / (1 - 1 / r)) ** lam
    return DIM / (s * r * alpha) * (SPHERE_AREA / DIM) ** lam * bracket


def lebesgue_norm(u: ScalarField, q: float) -> float:
    return float((u.grid.cell_volume * np.sum(np.abs(u.values) ** q)) ** (1 / q))


@dataclass
class HlsCheck:
    s: float
    r: float
    alpha: float
    lhs: float
    bound: float
    slack: float = 0.02

    @property
    def ok(self) -> bool:
        return self.lhs <= self.bound * (1 + self.slack)

    @property
    def ratio(self) -> float:
        return self.lhs / self.bound if self.bound else 0.0


def hls_check(f: ScalarField, g: ScalarField, s: float, r: float, alpha: float,
              riesz: RieszOperator = None) -> HlsCheck:
    """``∫∫ f(x) |x-y|^{-(N-α)} g(y)`` by the spectral route versus the bound."""
    bound_c = hls_constant_bound(s, r, alpha)
    if np.any(f.values < 0) or np.any(g.values < 0):
        raise ValueError("HLS check expects nonnegative test functions")
    if riesz is None or riesz.alpha != alpha or riesz.grid != f.grid:
        riesz = RieszOperator(alpha, f.grid)
    for h in (f, g):
        if not riesz.decays_in_box(h.values):
            warnings.warn("test function support is too close to the box boundary",
                          PeriodicImageWarning, stacklevel=2)
    conv = riesz.apply(f.values, check=False) / riesz_constant(alpha)
    lhs = float(f.grid.cell_volume * np.vdot(conv, g.values))
    bound = bound_c * lebesgue_norm(f, s) * lebesgue_norm(g, r)
    return HlsCheck(s, r, alpha, lhs, bound)


def hls_exponents(s: float, alpha: float) -> Tuple[float, float]:
    """The partner exponent ``r`` for ``s``."""
    inv = 1 + alpha / DIM - 1 / s
    if not 0 < inv < 1:
        raise ValueError(f"no admissible r for s={s}, alpha={alpha}")
    return s, 1 / inv


def random_bump(grid: GridSpec, rng: np.random.Generator, extent: float = 0.4) -> ScalarField:
    """Nonnegative Gaussian with random centre, width and height, well inside the box."""
    L = grid.half_length
    c = rng.uniform(-extent * L, extent * L, size=DIM)
    w = rng.uniform(0.05, 0.12) * L
    amp = rng.uniform(0.2, 5.0)
    X, Y, Z = grid.coords
    d2 = (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2
    return ScalarField(grid, np.broadcast_to(amp * np.exp(-d2 / (2 * w * w)), grid.shape).copy())


@dataclass
class DecayFit:
    rate: float
    prefactor: float
    annulus: Tuple[float, float]
    residual: float
    n_nodes: int


def decay_fit(u: ScalarField, centers: Sequence[Sequence[float]],
              annulus: Tuple[float, float] = None) -> DecayFit:
    """Fit ``log u ≈ log C - c d`` with ``d`` the distance to the nearest centre."""
    grid = u.grid
    L = grid.half_length
    r1, r2 = annulus if annulus is not None else (L / 4, L / 2)
    if not 0 <= r1 < r2:
        raise ValueError(f"bad annulus ({r1}, {r2})")
    if r2 > L / 2 + 1e-12:
        raise ValueError(f"annulus outer radius {r2} exceeds L/2 = {L / 2}")
    X, Y, Z = grid.coords
    d = None
    for c in centers:
        dc = np.sqrt((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2)
        d = dc if d is None else np.minimum(d, dc)
    d = np.broadcast_to(d, grid.shape)
    mask = (d >= r1) & (d <= r2) & (u.values > 0)
    count = int(mask.sum())
    if count < 50:
        raise ValueError(f"annulus too thin: {count} usable nodes")
    x = d[mask]
    y = np.log(u.values[mask])
    design = np.stack([np.ones_like(x), -x], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    return DecayFit(float(coef[1]), float(np.exp(coef[0])), (float(r1), float(r2)), resid, count)


def cube_isometries():
    """The 48 signed axis permutations."""
    for perm in itertools.permutations(range(DIM)):
        for signs in itertools.product((1, -1), repeat=DIM):
            yield perm, signs


def _apply_isometry(values: np.ndarray, perm, signs) -> np.ndarray:
    out = np.transpose(values, perm)
    n = values.shape[0]
    flip = (-np.arange(n)) % n  # node j <-> node n-j about the origin node n/2
    for ax, sg in enumerate(signs):
        if sg < 0:
            out = np.take(out, flip, axis=ax)
    return out


@dataclass
class SymmetryReport:
    max_deviation: float
    monotonicity_violations: int
    worst_isometry: tuple = None


def symmetry_report(u: ScalarField, tol: float = 1e-12) -> SymmetryReport:
    """Deviation from octahedral symmetry about the origin node and the number of
    increases along the six axis rays out of it (relative to ``max|u|``)."""
    v = u.values
    scale = np.abs(v).max()
    if scale == 0:
        return SymmetryReport(0.0, 0)
    worst, arg = 0.0, None
    for perm, signs in cube_isometries():
        dev = float(np.abs(_apply_isometry(v, perm, signs) - v).max() / scale)
        if dev > worst:
            worst, arg = dev, (perm, signs)
    n = u.grid.n
    c = n // 2
    rays = [v[c:, c, c], v[c::-1, c, c], v[c, c:, c], v[c, c::-1, c], v[c, c, c:], v[c, c, c::-1]]
    violations = int(sum(np.sum(np.diff(ray) > tol * scale) for ray in rays))
    return SymmetryReport(worst, violations, arg)
