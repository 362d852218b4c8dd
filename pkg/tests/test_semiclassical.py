import numpy as np
import pytest

from choquard.field import GridError, ScalarField, make_grid, translate
from choquard.limit import solve_ground_state
from choquard.nonlinearity import Nonlinearity
from choquard.potential import PenalizationSpec, preset
from choquard.riesz import RieszOperator
from choquard.semiclassical import (AnsatzSpec, ConcentrationReport, SweepEntry, aggregate_paths,
                                    build_initial_guess, default_t_grid, find_peaks, make_ansatz,
                                    path_profile, profile_distance, required_box, smooth_cutoff,
                                    solve_penalized, _embed)

NL = Nonlinearity.power(2.5)


@pytest.fixture(scope="module")
def pot():
    return preset("double_well")


@pytest.fixture(scope="module")
def local_states(pot):
    """Ground states of the m_i problems on a 32^3 window with spacing 0.5."""
    riesz = RieszOperator(2.0, make_grid(32, 8.0))
    return [solve_ground_state(w.depth, NL, riesz) for w in pot.wells]


@pytest.fixture(scope="module")
def ansatz(pot, local_states):
    return make_ansatz(pot, local_states, delta_fraction=1.0, beta_ratio=0.9)


def test_smooth_cutoff_profile():
    beta = 0.7
    r = np.linspace(0, 2, 2001)
    phi = smooth_cutoff(r, beta)
    assert np.all(phi[r <= beta] == 1) and np.all(phi[r >= 2 * beta] == 0)
    assert np.all(np.diff(phi) <= 0)
    # C^2 joins: one-sided second differences vanish at both ends
    h = 1e-4
    for r0 in (beta, 2 * beta):
        second = (smooth_cutoff(r0 + h, beta) - 2 * smooth_cutoff(r0, beta) + smooth_cutoff(r0 - h, beta)) / h ** 2
        assert abs(second) < 1e-2


def test_ansatz_parameters(ansatz):
    assert ansatz.delta == pytest.approx(1.0)
    assert ansatz.beta == pytest.approx(0.9)
    assert ansatz.limit_energies[0] < ansatz.limit_energies[1]  # E_m increases with m
    assert np.allclose(ansatz.anchors, [[-2.5, 0, 0], [2.5, 0, 0]])


def test_ansatz_validation(pot, local_states):
    with pytest.raises(ValueError, match="beta_ratio"):
        make_ansatz(pot, local_states, beta_ratio=1.0)
    with pytest.raises(ValueError, match="anchor 0"):
        make_ansatz(pot, local_states, 1.0, anchors=[[-1.0, 0, 0], [2.5, 0, 0]])
    with pytest.raises(ValueError, match="one ground state"):
        make_ansatz(pot, local_states[:1], 1.0)


def test_required_box(ansatz):
    n, L = required_box(ansatz, 0.5, 0.5)
    assert L >= (2.5 / 0.5 + 2 * 0.9 / 0.5) / 0.75
    assert n * 0.5 / 2 == L and n & (n - 1) == 0


def test_initial_guess_places_spikes(pot, ansatz):
    grid = make_grid(64, 16.0)
    pen = PenalizationSpec(0.5)
    guess = build_initial_guess(ansatz, pen, grid)
    peaks = find_peaks(guess.values, grid, pot, 0.5)
    assert [tuple(grid.node(p) * 0.5) for p in peaks] == [(-2.5, 0.0, 0.0), (2.5, 0.0, 0.0)]
    assert guess.min() >= 0


def test_initial_guess_box_too_small(ansatz):
    with pytest.raises(GridError, match="box too small"):
        build_initial_guess(ansatz, PenalizationSpec(0.25), make_grid(64, 16.0))


def test_path_profile(ansatz):
    pen = PenalizationSpec(0.5)
    t = default_t_grid(0.05, 4.0)
    profiles = [path_profile(ansatz, pen, i, t, NL, 2.0) for i in range(2)]
    for p, E_m in zip(profiles, ansatz.limit_energies):
        assert p.values[-1] < -2 and p.T == p.t[-1]
        assert p.C_estimate > 0 and 0 < p.t_at_max < p.T
        assert p.limit_energy == E_m
        assert p.C_estimate > E_m  # V >= m and Q >= 0 along the path
    D, E, E_tilde = aggregate_paths(profiles)
    assert D == pytest.approx(sum(p.C_estimate for p in profiles))
    assert E == pytest.approx(sum(ansatz.limit_energies))
    assert E_tilde == pytest.approx(max(ansatz.limit_energies))
    assert profiles[0].D_estimate == D
    closer = path_profile(ansatz, PenalizationSpec(0.35), 0, t, NL, 2.0)
    assert ansatz.limit_energies[0] < closer.C_estimate < profiles[0].C_estimate


def test_path_profile_window_too_small(ansatz):
    with pytest.raises(GridError):
        path_profile(ansatz, PenalizationSpec(0.25), 0, [1.0], NL, 2.0)


def test_profile_distance_of_exact_ansatz(pot, ansatz):
    # uncut ground states placed at x_i/ε: only the tail outside O^i_ε is lost
    grid = make_grid(64, 16.0)
    u = sum(translate(ScalarField(grid, _embed(U, grid)), x / 0.5).values
            for U, x in zip(ansatz.ground_states, ansatz.anchors))

    class Fake:
        epsilon = 0.5
    Fake.u = ScalarField(grid, u)
    for i, U in enumerate(ansatz.ground_states):
        lost = np.where(U.grid.radius >= 2.0 / 0.5, U.values, 0.0)
        expected = np.linalg.norm(lost) / np.linalg.norm(U.values)
        # the other spike's tail adds ~1e-5
        assert profile_distance(Fake, pot, i, U) == pytest.approx(expected, rel=1e-3)


def test_find_peaks_missing_well(pot):
    grid = make_grid(32, 8.0)
    X, Y, Z = grid.coords
    u = np.broadcast_to(np.exp(-((X + 5) ** 2 + Y ** 2 + Z ** 2)), grid.shape)
    assert find_peaks(u, grid, pot, 0.5) == [grid.index_of((-5.0, 0, 0)), None]


def test_report_mass_slope_and_rows():
    class Sol:
        def __init__(self, e):
            self.outside_mass = 3.0 * e ** 2
            self.peaks = [np.zeros(3), None]
            self.dist_to_M = [0.0, float("nan")]
            self.gamma_energy = self.q_value = self.grad_resid = self.decay_rate = 0.0
    entries = [SweepEntry(e, Sol(e), [], [0.1, 0.2], 1.0) for e in (0.5, 0.25)]
    entries.append(SweepEntry(0.1, None, [], [], float("nan"), error="boom"))
    rep = ConcentrationReport(entries, [1.0, 1.5], mu=2.0)
    assert rep.mass_slope() == pytest.approx(2.0)
    assert rep.E == 2.5 and rep.E_tilde == 1.5
    rows = rep.rows()
    assert len(rows) == 6 and rows[-1]["error"] == "boom" and rows[1]["peak_x"] == ""
    assert list(rows[0])[:9] == ["epsilon", "well", "peak_x", "peak_y", "peak_z", "dist_to_M",
                                 "gamma", "Q", "grad_resid"]


@pytest.mark.slow
def test_solve_penalized_two_spikes(pot, ansatz):
    grid = make_grid(64, 16.0)
    pen = PenalizationSpec(0.5)
    guess = build_initial_guess(ansatz, pen, grid)
    sol = solve_penalized(guess, pot, pen, NL, RieszOperator(2.0, grid), decay_annulus=(2.0, 3.5))
    assert sol.grad_resid <= 1e-5 and sol.peak_count_ok
    assert sol.min_value > -1e-4 * sol.u.max()
    assert sol.gamma_energy == pytest.approx(sum(ansatz.limit_energies), rel=0.1)
    assert all(d <= 0.5 for d in sol.dist_to_M)
    assert sol.decay_rate > 0
