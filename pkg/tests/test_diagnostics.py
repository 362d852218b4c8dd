import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from choquard.diagnostics import (cube_isometries, decay_fit, hls_check, hls_constant_bound,
                                  hls_exponents, lebesgue_norm, random_bump, symmetry_report)
from choquard.field import ScalarField, make_grid, translate
from choquard.riesz import RieszOperator, box_integral, riesz_constant


def lieb_loss_bound(s, r, alpha, N=3):
    """High-precision bound for the kernel |x-y|^{-λ}, λ = N - α."""
    mpmath.mp.dps = 40
    s, r, lam = mpmath.mpf(s), mpmath.mpf(r), N - mpmath.mpf(alpha)
    area = 2 * mpmath.pi ** (mpmath.mpf(N) / 2) / mpmath.gamma(mpmath.mpf(N) / 2)
    e = lam / N
    return (N / ((N - lam) * s * r) * (area / N) ** e
            * ((e / (1 - 1 / s)) ** e + (e / (1 - 1 / r)) ** e))


def test_constant_at_six_fifths():
    assert hls_constant_bound(1.2, 1.2, 2.0) == pytest.approx(4.231, abs=1e-3)


def test_constant_against_high_precision(rng):
    for _ in range(20):
        alpha = rng.uniform(0.1, 2.9)
        s, r = hls_exponents(rng.uniform(1 + 1e-3, 3 / alpha - 1e-3) if alpha > 0 else 2.0, alpha)
        if r <= 1:
            continue
        exact = float(lieb_loss_bound(s, r, alpha))
        assert hls_constant_bound(s, r, alpha) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("s, r, alpha", [(1.2, 1.3, 2.0), (0.9, 3.0, 2.0), (1.2, 1.2, 3.5)])
def test_constant_rejects_inadmissible(s, r, alpha):
    with pytest.raises(ValueError):
        hls_constant_bound(s, r, alpha)


def test_exponent_partner():
    assert hls_exponents(1.2, 2.0)[1] == pytest.approx(1.2)
    with pytest.raises(ValueError):
        hls_exponents(2.0, 2.0)


def test_lebesgue_norm_gaussian():
    grid = make_grid(32, 8.0)
    u = ScalarField(grid, np.exp(-grid.radius ** 2 / 2))
    q = 1.5
    # ∫ e^{-q r^2/2} = (2π/q)^{3/2}
    assert lebesgue_norm(u, q) == pytest.approx((2 * np.pi / q) ** (1.5 / q), rel=1e-10)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2 ** 32 - 1), frac=st.floats(0.05, 0.95))
def test_hls_never_violated(seed, frac):
    rng = np.random.default_rng(seed)
    grid = make_grid(32, 8.0)
    alpha = rng.uniform(0.5, 2.5)
    s, r = hls_exponents(1 + frac * (3 / alpha - 1) if alpha > 1 else 1 + frac, alpha)
    res = hls_check(random_bump(grid, rng), random_bump(grid, rng), s, r, alpha)
    assert res.ok and res.lhs <= res.bound


def test_hls_rejects_negative_input(grid32, rng):
    f = random_bump(grid32, rng)
    with pytest.raises(ValueError):
        hls_check(f * -1.0, f, 1.2, 1.2, 2.0)


def test_spectral_route_matches_direct_quadrature():
    grid = make_grid(16, 4.0)
    alpha = 2.0
    X, Y, Z = grid.coords
    f = np.broadcast_to(np.exp(-((X - 0.5) ** 2 + Y ** 2 + Z ** 2) / 1.0), grid.shape).ravel()
    g = np.broadcast_to(np.exp(-(X ** 2 + (Y + 0.5) ** 2 + Z ** 2) / 0.8), grid.shape).ravel()
    pts = np.stack([np.broadcast_to(c, grid.shape).ravel() for c in (X, Y, Z)], axis=1)
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    np.fill_diagonal(d, 1.0)
    K = d ** (alpha - 3)
    np.fill_diagonal(K, 0.0)
    h3 = grid.cell_volume
    self_cell = box_integral(alpha, grid.spacing / 2) / riesz_constant(alpha)
    direct = h3 * h3 * f @ K @ g + h3 * self_cell * f @ g
    op = RieszOperator(alpha, grid)
    spectral = h3 * np.vdot(op.apply(f.reshape(grid.shape), check=False), g.reshape(grid.shape)) / riesz_constant(alpha)
    assert spectral == pytest.approx(direct, rel=2e-2)


def exp_field(grid, rate, center=(0.0, 0.0, 0.0), amp=2.0):
    X, Y, Z = grid.coords
    d = np.sqrt((X - center[0]) ** 2 + (Y - center[1]) ** 2 + (Z - center[2]) ** 2)
    return ScalarField(grid, np.broadcast_to(amp * np.exp(-rate * d), grid.shape).copy())


@pytest.mark.parametrize("rate", [0.5, 1.3, 2.0])
def test_decay_fit_recovers_exponential(rate):
    fit = decay_fit(exp_field(make_grid(64, 16.0), rate), [(0, 0, 0)])
    assert fit.rate == pytest.approx(rate, rel=1e-10)
    assert fit.prefactor == pytest.approx(2.0, rel=1e-10)
    assert fit.annulus == (4.0, 8.0) and fit.residual < 1e-10


def test_decay_fit_two_centers():
    grid = make_grid(64, 16.0)
    u = ScalarField(grid, np.maximum(exp_field(grid, 1.0, (-3, 0, 0)).values,
                                     exp_field(grid, 1.0, (3, 0, 0)).values))
    assert decay_fit(u, [(-3, 0, 0), (3, 0, 0)], (1.0, 2.5)).rate == pytest.approx(1.0, rel=1e-10)


def test_decay_fit_is_translation_equivariant():
    grid = make_grid(64, 16.0)
    u = exp_field(grid, 0.8) + exp_field(grid, 0.3, amp=0.01)
    shift = (1.0, -1.5, 0.5)
    a = decay_fit(u, [(0, 0, 0)])
    b = decay_fit(translate(u, shift), [shift])
    assert b.rate == pytest.approx(a.rate, rel=1e-10)
    assert b.prefactor == pytest.approx(a.prefactor, rel=1e-10)


@pytest.mark.parametrize("annulus", [(3.0, 2.0), (1.0, 9.0), (4.0, 4.01)])
def test_decay_fit_bad_annulus(annulus):
    with pytest.raises(ValueError):
        decay_fit(exp_field(make_grid(64, 16.0), 1.0), [(0, 0, 0)], annulus)


def test_cube_isometries_form_the_octahedral_group():
    isos = list(cube_isometries())
    assert len(isos) == 48
    assert len({(tuple(p), tuple(s)) for p, s in isos}) == 48


def test_symmetry_of_radial_field(grid32):
    u = ScalarField(grid32, np.exp(-grid32.radius ** 2 / 3))
    rep = symmetry_report(u)
    assert rep.max_deviation <= 1e-6 and rep.monotonicity_violations == 0


def test_symmetry_detects_second_bump(grid32):
    X, Y, Z = grid32.coords
    extra = np.exp(-((X - 3) ** 2 + Y ** 2 + Z ** 2))
    u = ScalarField(grid32, np.exp(-grid32.radius ** 2 / 3) + 0.5 * extra)
    rep = symmetry_report(u)
    assert rep.max_deviation > 0.1 and rep.monotonicity_violations > 0


def test_symmetry_of_zero_field(grid32):
    assert symmetry_report(ScalarField.zeros(grid32)).max_deviation == 0.0
