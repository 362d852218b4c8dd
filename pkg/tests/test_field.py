import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from choquard.field import (GridError, GridSpec, ScalarField, dilate, dirichlet_energy, gradient,
                            h1_seminorm, helmholtz, helmholtz_inverse, inner, integrate, l2_norm,
                            laplacian, make_grid, sample, translate)


def gaussian(grid, width=1.0, center=(0.0, 0.0, 0.0)):
    return ScalarField.from_function(
        grid, lambda x, y, z: np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2
                                       + (z - center[2]) ** 2) / (2 * width ** 2)))


@pytest.mark.parametrize("n", [8, 24, 48, 100])
def test_grid_rejects_bad_n(n):
    with pytest.raises(GridError):
        GridSpec(n, 4.0)


@pytest.mark.parametrize("L", [0.0, -1.0, np.inf, np.nan])
def test_grid_rejects_bad_length(L):
    with pytest.raises(GridError):
        GridSpec(32, L)


def test_grid_geometry(grid32):
    assert grid32.spacing == 0.5
    assert grid32.cell_volume == 0.125
    assert grid32.axis[0] == -8.0 and grid32.axis[-1] == 7.5
    assert grid32.index_of((0.0, 0.0, 0.0)) == (16, 16, 16)
    assert grid32.index_of((8.0, 0.0, 0.0))[0] == 0  # periodic wrap
    np.testing.assert_array_equal(grid32.node((16, 0, 31)), [0.0, -8.0, 7.5])


def test_field_shape_and_finiteness(grid32):
    with pytest.raises(GridError):
        ScalarField(grid32, np.zeros((16, 16, 16)))
    bad = np.zeros(grid32.shape)
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        ScalarField(grid32, bad)


def test_arithmetic_requires_same_grid(grid32):
    u = ScalarField.zeros(grid32)
    v = ScalarField.zeros(make_grid(32, 4.0))
    with pytest.raises(GridError):
        u + v
    w = (u + 2.0) * 3.0 - 1.0
    assert np.all(w.values == 5.0)


def test_gaussian_integral(grid32):
    # ∫ e^{-r^2/2} = (2π)^{3/2}
    assert integrate(gaussian(grid32)) == pytest.approx((2 * np.pi) ** 1.5, rel=1e-12)


def test_laplacian_of_gaussian(grid32):
    u = gaussian(grid32)
    r2 = grid32.radius ** 2
    exact = (r2 - 3) * u.values
    assert np.abs(laplacian(u).values - exact).max() < 1e-8


@pytest.mark.parametrize("a", [0.3, 1.0, 4.0])
def test_helmholtz_round_trip(grid32, rng, a):
    u = ScalarField(grid32, rng.standard_normal(grid32.shape))
    back = helmholtz_inverse(helmholtz(u, a), a)
    assert np.abs(back.values - u.values).max() < 1e-12


def test_helmholtz_inverse_rejects_nonpositive(grid32):
    with pytest.raises(ValueError):
        helmholtz_inverse(gaussian(grid32), 0.0)


def test_dirichlet_energy_matches_gradient(grid32):
    u = gaussian(grid32, 1.3, (0.4, -0.2, 0.1))
    gx, gy, gz = gradient(u)
    direct = grid32.cell_volume * np.sum(gx ** 2 + gy ** 2 + gz ** 2)
    assert dirichlet_energy(grid32, u.values) == pytest.approx(direct, rel=1e-10)
    # ∫|∇e^{-r^2/2}|^2 = (3/2) π^{3/2}
    assert h1_seminorm(gaussian(grid32)) ** 2 == pytest.approx(1.5 * np.pi ** 1.5, rel=1e-10)


def test_norms(grid32):
    u = gaussian(grid32)
    assert l2_norm(u) ** 2 == pytest.approx(np.pi ** 1.5, rel=1e-12)
    assert inner(u, u) == pytest.approx(l2_norm(u) ** 2)


def test_sample_outside_box_is_zero(grid32):
    u = gaussian(grid32)
    assert sample(u, (np.array([20.0]), np.array([0.0]), np.array([0.0])))[0] == 0.0


def test_dilate_identity_and_scaling(grid64):
    u = gaussian(grid64)
    assert np.array_equal(dilate(u, 1.0).values, u.values)
    # u(x/t) of a Gaussian is a wider Gaussian
    exact = gaussian(grid64, 1.2).values
    assert np.abs(dilate(u, 1.2).values - exact).max() < 0.05
    assert np.abs(dilate(u, 1.2, order=3).values - exact).max() < 5e-3
    with pytest.raises(ValueError):
        dilate(u, 0.0)


def test_translate_whole_nodes_is_exact_roll(grid32):
    u = gaussian(grid32)
    shifted = translate(u, (1.0, -0.5, 0.0))
    assert np.array_equal(shifted.values, np.roll(u.values, (2, -1, 0), axis=(0, 1, 2)))


@settings(max_examples=20, deadline=None)
@given(st.tuples(*[st.floats(-2.0, 2.0)] * 3))
def test_translate_matches_shifted_gaussian(shift):
    grid = make_grid(32, 8.0)
    moved = translate(gaussian(grid), shift)
    assert np.abs(moved.values - gaussian(grid, 1.0, shift).values).max() < 1e-6
