"""Uniform periodic grids in three dimensions and the spectral operators on them.

Everything here works on a cube ``[-L, L)^3`` sampled at ``n`` points per axis
with nodes ``x_j = -L + j h`` and ``h = 2L / n``.  Fields are stored as
``(n, n, n)`` float64 arrays in C (row-major) order, index order ``(x, y, z)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np
import scipy.fft as sfft
from scipy import ndimage

DIM = 3

Number = Union[int, float]


class GridError(ValueError):
    """Raised for invalid grid parameters or mismatched grids."""


@dataclass(frozen=True)
class GridSpec:
    n: int
    half_length: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise GridError(f"n must be a power of 2 and >= 16, got {n!r}")
        if not (np.isfinite(self.half_length) and self.half_length > 0):
            raise GridError(f"half_length must be positive, got {self.half_length!r}")

    @property
    def dim(self) -> int:
        return DIM

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * DIM

    @property
    def cell_volume(self) -> float:
        return self.spacing ** DIM

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_length + self.spacing * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple:
        """Broadcastable coordinate arrays ``(X, Y, Z)`` of shapes (n,1,1), (1,n,1), (1,1,n)."""
        a = self.axis
        return a[:, None, None], a[None, :, None], a[None, None, :]

    @cached_property
    def radius(self) -> np.ndarray:
        X, Y, Z = self.coords
        return np.sqrt(X**2 + Y**2 + Z**2)

    @cached_property
    def k2(self) -> np.ndarray:
        """Squared angular wavenumbers on the rfftn half-spectrum."""
        k = 2 * np.pi * sfft.fftfreq(self.n, d=self.spacing)
        kr = 2 * np.pi * sfft.rfftfreq(self.n, d=self.spacing)
        return k[:, None, None] ** 2 + k[None, :, None] ** 2 + kr[None, None, :] ** 2

    def index_of(self, point: Sequence[float]) -> tuple:
        """Nearest node index (periodic) of a point."""
        idx = np.rint((np.asarray(point, dtype=float) + self.half_length) / self.spacing)
        return tuple(int(i) % self.n for i in idx)

    def node(self, index: Sequence[int]) -> np.ndarray:
        return self.axis[np.asarray(index, dtype=int)]


def make_grid(n: int, half_length: float) -> GridSpec:
    return GridSpec(int(n) if float(n).is_integer() else n, float(half_length))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values on a :class:`GridSpec`.

    Supports ``+``, ``-``, ``*`` and ``/`` with scalars and with fields on the
    same grid.  The values array is not copied on construction.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise GridError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "ScalarField":
        X, Y, Z = grid.coords
        return cls(grid, np.broadcast_to(func(X, Y, Z), grid.shape).copy())

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def _other(self, other):
        if isinstance(other, ScalarField):
            check_same_grid(self.grid, other.grid)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def abs_max(self) -> float:
        return float(np.abs(self.values).max())


def check_same_grid(a: GridSpec, b: GridSpec) -> None:
    if a != b:
        raise GridError(f"grid mismatch: {a} vs {b}")


# --- spectral operators -----------------------------------------------------

def _rfft(values):
    return sfft.rfftn(values, workers=-1)


def _irfft(spectrum, shape):
    return sfft.irfftn(spectrum, s=shape, workers=-1)


def laplacian_values(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    return _irfft(-grid.k2 * _rfft(values), grid.shape)


def helmholtz_values(grid: GridSpec, values: np.ndarray, a: float) -> np.ndarray:
    """Apply ``(-Δ + a)`` spectrally."""
    return _irfft((grid.k2 + a) * _rfft(values), grid.shape)


def helmholtz_inverse_values(grid: GridSpec, values: np.ndarray, a: float) -> np.ndarray:
    if not a > 0:
        raise ValueError(f"helmholtz_inverse needs a > 0 (operator not coercive), got {a}")
    return _irfft(_rfft(values) / (grid.k2 + a), grid.shape)


def laplacian(u: ScalarField) -> ScalarField:
    return ScalarField(u.grid, laplacian_values(u.grid, u.values))


def helmholtz(u: ScalarField, a: float) -> ScalarField:
    return ScalarField(u.grid, helmholtz_values(u.grid, u.values, a))


def helmholtz_inverse(rhs: ScalarField, a: float) -> ScalarField:
    """Solve ``(-Δ + a) u = rhs`` exactly in the discrete spectral sense."""
    return ScalarField(rhs.grid, helmholtz_inverse_values(rhs.grid, rhs.values, a))


def gradient(u: ScalarField) -> tuple:
    """Spectral gradient components ``(∂x u, ∂y u, ∂z u)`` as arrays."""
    g = u.grid
    k = 2 * np.pi * sfft.fftfreq(g.n, d=g.spacing)
    kr = 2 * np.pi * sfft.rfftfreq(g.n, d=g.spacing)
    # the Nyquist mode has no odd partner; drop it for first derivatives
    if g.n % 2 == 0:
        k = k.copy()
        k[g.n // 2] = 0.0
        kr = kr.copy()
        kr[-1] = 0.0
    uh = _rfft(u.values)
    return (
        _irfft(1j * k[:, None, None] * uh, g.shape),
        _irfft(1j * k[None, :, None] * uh, g.shape),
        _irfft(1j * kr[None, None, :] * uh, g.shape),
    )


# --- quadrature ---------------------------------------------------------------

def integrate(u: Union[ScalarField, np.ndarray], grid: GridSpec = None) -> float:
    """Rectangle rule ``h^3 Σ u``."""
    if isinstance(u, ScalarField):
        grid, values = u.grid, u.values
    else:
        values = u
    return float(grid.cell_volume * values.sum())


def inner(u: ScalarField, v: ScalarField) -> float:
    check_same_grid(u.grid, v.grid)
    return float(u.grid.cell_volume * np.vdot(u.values, v.values))


def l2_norm(u: ScalarField) -> float:
    return float(np.sqrt(inner(u, u)))


def h1_seminorm(u: ScalarField) -> float:
    """``sqrt(∫|∇u|^2)`` computed as ``sqrt(<-Δu, u>)`` with the spectral Laplacian."""
    return float(np.sqrt(max(dirichlet_energy(u.grid, u.values), 0.0)))


def dirichlet_energy(grid: GridSpec, values: np.ndarray) -> float:
    """``∫|∇u|^2`` evaluated spectrally by Parseval."""
    uh = _rfft(values)
    w = np.full(uh.shape[-1], 2.0)
    w[0] = 1.0
    if grid.n % 2 == 0:
        w[-1] = 1.0
    s = np.einsum("ijk,k->", grid.k2 * (uh.real**2 + uh.imag**2), w)
    return float(grid.cell_volume * s / grid.n**DIM)


# --- geometric maps ---------------------------------------------------------

def sample(u: ScalarField, points: Sequence[np.ndarray], order: int = 1) -> np.ndarray:
    """Interpolate ``u`` at physical coordinates; points outside the box read as 0."""
    g = u.grid
    idx = [(np.asarray(p, dtype=float) + g.half_length) / g.spacing for p in points]
    idx = np.broadcast_arrays(*idx)
    return ndimage.map_coordinates(u.values, idx, order=order, mode="grid-constant", cval=0.0,
                                   prefilter=order > 1)


def dilate(u: ScalarField, t: float, order: int = 1) -> ScalarField:
    """Return ``x -> u(x / t)`` by trilinear interpolation (``order=1``)."""
    if not t > 0:
        raise ValueError(f"dilation factor must be positive, got {t}")
    if t == 1:
        return ScalarField(u.grid, u.values.copy())
    X, Y, Z = u.grid.coords
    return ScalarField(u.grid, sample(u, (X / t, Y / t, Z / t), order=order))


def translate(u: ScalarField, shift: Sequence[float]) -> ScalarField:
    """Periodic translation ``x -> u(x - shift)``.

    The whole-node part of the shift is an exact roll; the fractional remainder
    is applied as a Fourier phase ramp (band-limited interpolation).
    """
    g = u.grid
    s = np.asarray(shift, dtype=float) / g.spacing
    if s.shape != (DIM,) or not np.all(np.isfinite(s)):
        raise ValueError(f"shift must be a finite 3-vector, got {shift!r}")
    whole = np.rint(s)
    frac = s - whole
    out = np.roll(u.values, tuple(int(w) for w in whole), axis=(0, 1, 2))
    if np.any(np.abs(frac) > 1e-14):
        h = g.spacing
        k = 2 * np.pi * sfft.fftfreq(g.n, d=h)
        kr = 2 * np.pi * sfft.rfftfreq(g.n, d=h)
        phase = (np.exp(-1j * k * frac[0] * h)[:, None, None]
                 * np.exp(-1j * k * frac[1] * h)[None, :, None]
                 * np.exp(-1j * kr * frac[2] * h)[None, None, :])
        out = _irfft(_rfft(out) * phase, g.shape)
    return ScalarField(g, out)
