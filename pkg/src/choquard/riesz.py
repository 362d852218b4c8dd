"""Free-space Riesz potential ``I_α * g`` on a periodic grid.

The source is zero-padded to ``2n`` points per axis (a periodic box of side
``4L``), multiplied in frequency by ``|k|^{-α}`` and cropped back.  With that
padding every displacement between two nodes of the original box is
represented once, so the only error left is the choice of the ``k = 0`` mode,
i.e. the constant that the periodic images add.  Three rules are offered:

``"ewald"`` (default)
    The zero mode is the Ewald-regularised constant that cancels the
    image-lattice offset, so the periodic kernel matches ``I_α`` up to
    ``O(|x|^2 / V)`` near the origin.
``"truncate_to_box_mean"``
    The integral of ``I_α`` over the padded box (the zero mode of the
    box-truncated kernel).
``"screen"``
    ``(|k|^2 + κ^2)^{-α/2}`` on every mode, a Yukawa-like screened kernel for
    sensitivity checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import integrate as sint
from scipy import special

from .field import DIM, GridSpec, ScalarField, check_same_grid

ZERO_MODE_RULES = ("ewald", "truncate_to_box_mean", "screen")


class PeriodicImageWarning(UserWarning):
    """The source does not decay inside the box; periodic images contaminate the result."""


def riesz_constant(alpha: float, dim: int = DIM) -> float:
    """Normalisation ``A_α`` with ``I_α(x) = A_α |x|^{α-N}``."""
    return special.gamma((dim - alpha) / 2) / (
        special.gamma(alpha / 2) * np.pi ** (dim / 2) * 2**alpha)


def riesz_kernel(alpha: float, r) -> np.ndarray:
    return riesz_constant(alpha) * np.asarray(r, dtype=float) ** (alpha - DIM)


@lru_cache(maxsize=64)
def ewald_offset(alpha: float, box: float, split: float = 5.5) -> float:
    """``lim_{x->0} [K_per(x) - I_α(x)]`` for the zero-mean periodic Riesz kernel.

    ``K_per`` is the period-``box`` kernel whose Fourier coefficients are
    ``|k|^{-α}`` for ``k != 0`` and 0 at ``k = 0``.  Computed by Ewald
    splitting with incomplete gamma functions; independent of the splitting
    parameter to round-off.
    """
    p = DIM - alpha
    c = riesz_constant(alpha)
    eta = split / box
    vol = box**DIM

    m = np.arange(-3, 4)
    n = np.stack(np.meshgrid(m, m, m, indexing="ij"), -1).reshape(-1, DIM)
    n = n[np.any(n != 0, axis=1)]
    rn = np.linalg.norm(n, axis=1) * box
    real_sum = c * np.sum(special.gammaincc(p / 2, (eta * rn) ** 2) / rn**p)

    m = np.arange(-14, 15)
    kv = np.stack(np.meshgrid(m, m, m, indexing="ij"), -1).reshape(-1, DIM)
    kv = kv[np.any(kv != 0, axis=1)]
    kn = 2 * np.pi * np.linalg.norm(kv, axis=1) / box
    recip_sum = np.sum(kn ** (-alpha) * special.gammaincc(alpha / 2, (kn / (2 * eta)) ** 2)) / vol

    self_term = c * eta**p / special.gamma(1 + p / 2)
    short_zero = eta ** (-alpha) / (special.gamma(1 + alpha / 2) * 2**alpha) / vol
    return float(real_sum + recip_sum - self_term - short_zero)


@lru_cache(maxsize=64)
def box_integral(alpha: float, half_side: float) -> float:
    """``∫ I_α`` over the cube ``[-s, s]^3``.

    Splits the cube into six pyramids with apex at the origin, which reduces
    the singular volume integral to a smooth face integral.
    """
    s = half_side
    q = (alpha - DIM) / 2
    face, _ = sint.dblquad(lambda z, y: (s * s + y * y + z * z) ** q, 0, s, 0, s,
                           epsabs=0, epsrel=1e-12)
    return float(riesz_constant(alpha) * 6 * s / alpha * 4 * face)


@dataclass
class RieszOperator:
    """Precomputed Fourier multiplier for ``g -> I_α * g`` on ``grid``."""

    alpha: float
    grid: GridSpec
    zero_mode_rule: str = "ewald"
    kappa: float = None
    multiplier: np.ndarray = dc_field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.alpha < DIM:
            raise ValueError(f"alpha must lie in (0, {DIM}), got {self.alpha}")
        if self.zero_mode_rule not in ZERO_MODE_RULES:
            raise ValueError(f"unknown zero-mode rule {self.zero_mode_rule!r}; "
                             f"expected one of {ZERO_MODE_RULES}")
        if self.zero_mode_rule == "screen" and not (self.kappa and self.kappa > 0):
            raise ValueError("screened zero-mode rule needs kappa > 0")
        g = self.grid
        m = 2 * g.n
        k = 2 * np.pi * sfft.fftfreq(m, d=g.spacing)
        kr = 2 * np.pi * sfft.rfftfreq(m, d=g.spacing)
        k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + kr[None, None, :] ** 2
        if self.zero_mode_rule == "screen":
            mult = (k2 + self.kappa**2) ** (-self.alpha / 2)
        else:
            k2[0, 0, 0] = 1.0
            mult = k2 ** (-self.alpha / 2)
            mult[0, 0, 0] = self.zero_mode_value()
        self.multiplier = mult
        outer = np.abs(g.axis) >= 0.75 * g.half_length
        self._shell = outer[:, None, None] | outer[None, :, None] | outer[None, None, :]

    @property
    def padded_box(self) -> float:
        return 4 * self.grid.half_length

    def zero_mode_value(self) -> float:
        box = self.padded_box
        if self.zero_mode_rule == "ewald":
            return -ewald_offset(self.alpha, box) * box**DIM
        if self.zero_mode_rule == "truncate_to_box_mean":
            return box_integral(self.alpha, box / 2)
        return self.kappa ** (-self.alpha)

    def decays_in_box(self, values: np.ndarray, rtol: float = 1e-6) -> bool:
        top = np.abs(values).max()
        return top == 0 or np.abs(values[self._shell]).max() <= rtol * top

    def apply(self, values: np.ndarray, check: bool = True) -> np.ndarray:
        n = self.grid.n
        if check and not self.decays_in_box(values):
            warnings.warn("source does not decay in the outer quarter of the box; "
                          "periodic images contaminate the Riesz potential",
                          PeriodicImageWarning, stacklevel=2)
        padded = np.zeros((2 * n,) * DIM)
        padded[:n, :n, :n] = values
        spec = sfft.rfftn(padded, workers=-1)
        spec *= self.multiplier
        return sfft.irfftn(spec, s=padded.shape, workers=-1)[:n, :n, :n]

    def __call__(self, g: ScalarField) -> ScalarField:
        return riesz_convolve(self, g)


def riesz_convolve(op: RieszOperator, g: ScalarField) -> ScalarField:
    check_same_grid(op.grid, g.grid)
    return ScalarField(g.grid, op.apply(g.values))
