"""Penalised semiclassical problem: ansatz, dilation paths, solver and ε-sweeps.

Everything here lives on the rescaled grid ``x = y/ε`` where the equation reads
``-Δu + V(εx) u = (I_α * F(u)) f(u)``; positions reported in the original
variables are multiplied back by ``ε``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .diagnostics import DecayFit, decay_fit
from .field import (DIM, GridError, GridSpec, ScalarField, dilate, dirichlet_energy,
                    helmholtz_inverse_values, helmholtz_values, make_grid, translate)
from .functionals import EnergyReport, PenalizedProblem
from .limit import GroundState, SolverOptions, solve_ground_state
from .newton import ConvergenceError, newton_krylov
from .nonlinearity import Nonlinearity
from .potential import PenalizationSpec, PotentialSpec
from .riesz import RieszOperator

log = logging.getLogger(__name__)


def smooth_cutoff(r, beta: float):
    """1 on ``r <= β``, 0 on ``r >= 2β``, quintic C^2 blend in between."""
    s = np.clip((np.asarray(r, dtype=float) - beta) / beta, 0.0, 1.0)
    return 1 - s**3 * (10 - 15 * s + 6 * s * s)


@dataclass
class AnsatzSpec:
    """Data of the approximate-solution set: ``δ, β``, anchors ``x_i`` (original
    variables) and one ground state ``U_i`` of the ``m_i``-problem per well."""

    pot: PotentialSpec
    ground_states: List[ScalarField]
    limit_energies: List[float]
    delta: float
    beta: float
    anchors: np.ndarray

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=float).reshape(-1, DIM)
        k = self.pot.k
        if not (len(self.ground_states) == len(self.limit_energies) == len(self.anchors) == k):
            raise ValueError("need one ground state, energy and anchor per well")
        if not 0 < self.beta < self.delta:
            raise ValueError(f"need 0 < beta < delta, got beta={self.beta}, delta={self.delta}")
        for i, x in enumerate(self.anchors):
            if self.pot.dist_to_minimum_set(x, i) > self.beta:
                raise ValueError(f"anchor {i} lies outside the beta-neighbourhood of its minimum set")
        for i in range(k):
            for j in range(i + 1, k):
                if np.linalg.norm(self.anchors[i] - self.anchors[j]) <= 4 * self.beta:
                    raise ValueError(f"cutoff supports of wells {i} and {j} overlap")

    @property
    def k(self) -> int:
        return self.pot.k


def make_ansatz(pot: PotentialSpec, ground_states: Sequence[GroundState],
                delta_fraction: float = 0.1, beta_ratio: float = 0.9,
                anchors=None) -> AnsatzSpec:
    """``δ = delta_fraction · min{dist(M, O^c), min dist(O^i, O^j)}``, ``β = beta_ratio · δ``."""
    if not 0 < beta_ratio < 1:
        raise ValueError("beta_ratio must lie in (0, 1)")
    delta = pot.delta(delta_fraction)
    anchors = pot.centers if anchors is None else anchors
    return AnsatzSpec(pot, [gs.U for gs in ground_states], [gs.energy for gs in ground_states],
                      delta, beta_ratio * delta, anchors)


def limit_ground_states(pot: PotentialSpec, nl: Nonlinearity, riesz: RieszOperator,
                        options: SolverOptions = None) -> List[GroundState]:
    """Ground states of the ``m_i``-problems on ``riesz.grid``."""
    return [solve_ground_state(w.depth, nl, riesz, options=options) for w in pot.wells]


def _embed(U: ScalarField, grid: GridSpec) -> np.ndarray:
    """Place ``U`` (centred on its origin node) into ``grid`` around the origin node."""
    small = U.grid
    if not np.isclose(small.spacing, grid.spacing):
        raise GridError(f"ground-state spacing {small.spacing} differs from grid spacing {grid.spacing}")
    if small.n > grid.n:
        raise GridError("ground-state window larger than the target grid")
    out = np.zeros(grid.shape)
    lo = grid.n // 2 - small.n // 2
    sl = slice(lo, lo + small.n)
    out[sl, sl, sl] = U.values
    return out


def required_box(ansatz: AnsatzSpec, epsilon: float, spacing: float) -> Tuple[int, float]:
    """Smallest ``(n, L)`` at ``spacing`` so every bump support sits in the inner
    three quarters of the box."""
    reach = np.abs(ansatz.anchors).max() / epsilon + 2 * ansatz.beta / epsilon
    L = reach / 0.75
    n = 16
    while n * spacing < 2 * L:
        n *= 2
    return n, n * spacing / 2


def build_initial_guess(ansatz: AnsatzSpec, pen: PenalizationSpec, grid: GridSpec) -> ScalarField:
    """``Σ_i φ_ε(y - x_i/ε) U_i(y - x_i/ε)`` on the rescaled grid."""
    e = pen.epsilon
    n_req, L_req = required_box(ansatz, e, grid.spacing)
    if grid.half_length < L_req - 1e-12:
        raise GridError(f"box too small for epsilon={e}: need half_length >= {L_req:g} "
                        f"(n >= {n_req} at spacing {grid.spacing:g})")
    X, Y, Z = grid.coords
    total = np.zeros(grid.shape)
    for U, x in zip(ansatz.ground_states, ansatz.anchors):
        c = x / e
        bump = translate(ScalarField(grid, _embed(U, grid)), c).values
        r = np.sqrt((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2)
        total += smooth_cutoff(e * r, ansatz.beta) * bump
    return ScalarField(grid, total)


@dataclass
class PathProfile:
    well: int
    epsilon: float
    t: np.ndarray
    values: np.ndarray
    T: float                # first sampled t with Γ^i_ε < -2
    C_estimate: float       # max along the sampled path
    t_at_max: float
    limit_energy: float     # E_{m_i}
    D_estimate: float = None
    E: float = None
    E_tilde: float = None


def path_profile(ansatz: AnsatzSpec, pen: PenalizationSpec, i: int, t_grid: Sequence[float],
                 nl: Nonlinearity, alpha: float) -> PathProfile:
    """Sample ``t -> Γ^i_ε(W^i_{ε,t})`` with ``W^i_{ε,t} = (φ_ε U_{i,t})(· - x_i/ε)``.

    The path lives on the ground state's own window, whose origin is placed
    at ``x_i/ε``; the energy is translation invariant apart from ``V_ε`` and
    ``χ^i_ε``, which are evaluated at the true positions.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise ValueError("t_grid must be positive")
    e = pen.epsilon
    U = ansatz.ground_states[i]
    grid = U.grid
    if 2 * ansatz.beta / e > 0.75 * grid.half_length:
        raise GridError(f"cutoff radius {2 * ansatz.beta / e:g} does not fit the ground-state window")
    riesz = RieszOperator(alpha, grid)
    prob = PenalizedProblem(ansatz.pot, pen, nl, riesz, chi_well=i, offset=ansatz.anchors[i] / e)
    phi = smooth_cutoff(e * grid.radius, ansatz.beta)
    values = []
    for t in t_grid:
        values.append(prob.energy(phi * dilate(U, t, order=3).values))
        if values[-1] < -2:
            break  # T_i found; the rest of the path is not needed
    t_grid = t_grid[:len(values)]
    values = np.array(values)
    below = np.nonzero(values < -2)[0]
    if below.size == 0:
        raise ValueError(f"path of well {i} never drops below -2 up to t={t_grid.max():g}; "
                         "extend T_search")
    T = float(t_grid[below[0]])
    j = int(np.argmax(values[: below[0] + 1]))
    return PathProfile(i, e, t_grid, values, T, float(values[j]), float(t_grid[j]),
                       ansatz.limit_energies[i])


def aggregate_paths(profiles: List[PathProfile]) -> Tuple[float, float, float]:
    """``(D estimate, E, Ẽ)`` and fills them into every profile."""
    D = float(sum(p.C_estimate for p in profiles))
    energies = [p.limit_energy for p in profiles]
    E = float(sum(energies))
    E_tilde = float(max(E - x for x in energies)) if len(energies) > 1 else 0.0
    for p in profiles:
        p.D_estimate, p.E, p.E_tilde = D, E, E_tilde
    return D, E, E_tilde


def default_t_grid(step: float = 0.02, t_max: float = 4.0) -> np.ndarray:
    return step * np.arange(1, int(round(t_max / step)) + 1)


@dataclass
class SemiclassicalSolution:
    epsilon: float
    u: ScalarField
    gamma_energy: float
    q_value: float
    grad_resid: float
    peaks: List[np.ndarray]          # original variables, one per well (None if missing)
    peak_nodes: List[np.ndarray]     # rescaled grid positions
    dist_to_M: List[float]
    report: EnergyReport
    outside_mass: float              # ∫ over the complement of O_ε of u^2
    ansatz_distance: float           # ||u - guess|| / ||guess|| in the ε-weighted H^1 norm
    within_d: bool
    peak_count_ok: bool
    min_value: float
    decay: Optional[DecayFit] = None
    history: List[float] = field(default_factory=list)

    @property
    def decay_rate(self) -> float:
        """Fitted rate in the original variables (``c/ε``)."""
        return self.decay.rate / self.epsilon if self.decay else float("nan")


def find_peaks(u: np.ndarray, grid: GridSpec, pot: PotentialSpec, epsilon: float,
               floor: float = 1e-6) -> List[Optional[Tuple[int, int, int]]]:
    """Largest strict 26-neighbour local maximum inside each well (ties: first index)."""
    is_max = u > floor * u.max()
    for shift in np.ndindex(3, 3, 3):
        if shift == (1, 1, 1):
            continue
        is_max &= u > np.roll(u, tuple(1 - s for s in shift), axis=(0, 1, 2))
    idx = np.argwhere(is_max)
    best: List[Optional[Tuple[int, int, int]]] = [None] * pot.k
    for ijk in idx:  # argwhere is lexicographic, so strict > keeps the first of ties
        w = pot.well_of(epsilon * grid.node(ijk))
        if w >= 0 and (best[w] is None or u[tuple(ijk)] > u[best[w]]):
            best[w] = tuple(int(v) for v in ijk)
    return best


def weighted_h1(grid: GridSpec, V: np.ndarray, v: np.ndarray) -> float:
    return float(np.sqrt(dirichlet_energy(grid, v) + grid.cell_volume * np.vdot(V * v, v)))


def solve_penalized(guess: ScalarField, pot: PotentialSpec, pen: PenalizationSpec,
                    nl: Nonlinearity, riesz: RieszOperator, grad_tol: float = 1e-5,
                    newton_tol: float = 1e-8, max_iter: int = 40, energy_cap: float = None,
                    d_ratio: float = 0.2, decay_annulus: Tuple[float, float] = None,
                    fallback_steps: int = 200) -> SemiclassicalSolution:
    """Critical point of ``Γ_ε`` near ``guess`` by damped Newton-MINRES.

    If Newton stalls, a Sobolev-preconditioned residual descent is run and
    Newton restarted once.  ``energy_cap`` (typically twice the D estimate)
    aborts runaway iterates.
    """
    grid = guess.grid
    prob = PenalizedProblem(pot, pen, nl, riesz)
    shift = max(float(prob.V.min()), 1e-3)
    pre = lambda r: helmholtz_inverse_values(grid, r, shift)
    u0 = guess.values

    def run(u):
        return newton_krylov(u, prob.gradient, prob.linearization, pre,
                             lambda v: helmholtz_values(grid, v, shift), tol=newton_tol,
                             max_iter=max_iter, energy=prob.energy, energy_cap=energy_cap)

    out = run(u0)
    history = list(out.history)
    u = out.u
    if not out.residual <= grad_tol:
        log.info("newton stalled at %.3e; preconditioned descent fallback", out.residual)
        tau = 1.0
        r = prob.gradient(u)
        rn = np.linalg.norm(r)
        for _ in range(fallback_steps):
            trial = u - tau * pre(r)
            rt = prob.gradient(trial)
            if np.linalg.norm(rt) < rn:
                u, r, rn = trial, rt, np.linalg.norm(rt)
                tau = min(1.0, tau * 1.5)
            else:
                tau *= 0.5
                if tau < 1e-6:
                    break
        out = run(u)
        history.extend(out.history)
        u = out.u
    res = float(np.linalg.norm(prob.gradient(u)) / max(np.linalg.norm(u), 1e-300))
    if not res <= grad_tol:
        raise ConvergenceError(f"penalized solve did not converge: residual {res:.3e}", history, u)

    rep = prob.energy_report(u)
    e = pen.epsilon
    nodes = find_peaks(u, grid, pot, e)
    peaks, peak_nodes, dists = [], [], []
    for i, ijk in enumerate(nodes):
        if ijk is None:
            peaks.append(None)
            peak_nodes.append(None)
            dists.append(float("nan"))
            continue
        x = grid.node(ijk)
        peak_nodes.append(x)
        peaks.append(e * x)
        dists.append(pot.dist_to_minimum_set(e * x, i))
    count_ok = all(p is not None for p in nodes)
    if not count_ok:
        log.warning("expected one peak per well, found %s", nodes)

    X, Y, Z = grid.coords
    outside = ~np.broadcast_to(pot.in_well(e * X, e * Y, e * Z), grid.shape)
    outside_mass = float(grid.cell_volume * np.sum(u[outside] ** 2))
    g_norm = weighted_h1(grid, prob.V, u0)
    dist = weighted_h1(grid, prob.V, u - u0) / g_norm if g_norm > 0 else float("inf")

    fit = None
    if decay_annulus is not None and count_ok:
        fit = decay_fit(ScalarField(grid, u), peak_nodes, decay_annulus)
    return SemiclassicalSolution(
        epsilon=e, u=ScalarField(grid, u), gamma_energy=rep.total, q_value=rep.penalty,
        grad_resid=res, peaks=peaks, peak_nodes=peak_nodes, dist_to_M=dists, report=rep,
        outside_mass=outside_mass, ansatz_distance=dist, within_d=dist <= d_ratio,
        peak_count_ok=count_ok, min_value=float(u.min()), decay=fit, history=history)


def profile_distance(sol: SemiclassicalSolution, pot: PotentialSpec, i: int, U: ScalarField) -> float:
    """``||u_ε(· + x_ε^i/ε) - U_i||_2 / ||U_i||_2`` with ``u_ε`` restricted to ``O^i_ε``."""
    grid = sol.u.grid
    e = sol.epsilon
    X, Y, Z = grid.coords
    mask = np.broadcast_to(pot.in_well(e * X, e * Y, e * Z, i), grid.shape)
    v = np.where(mask, sol.u.values, 0.0)
    idx = np.unravel_index(np.argmax(v), v.shape)
    v = np.roll(v, [grid.n // 2 - j for j in idx], axis=(0, 1, 2))
    m = U.grid.n
    lo = grid.n // 2 - m // 2
    sl = slice(lo, lo + m)
    window = v[sl, sl, sl]
    return float(np.linalg.norm(window - U.values) / np.linalg.norm(U.values))


@dataclass
class SweepEntry:
    epsilon: float
    solution: Optional[SemiclassicalSolution]
    profiles: List[PathProfile]
    profile_dist: List[float]
    D_estimate: float
    error: str = None


@dataclass
class ConcentrationReport:
    entries: List[SweepEntry]
    limit_energies: List[float]
    mu: float

    @property
    def E(self) -> float:
        return float(sum(self.limit_energies))

    @property
    def E_tilde(self) -> float:
        if len(self.limit_energies) < 2:
            return 0.0
        return float(max(self.E - x for x in self.limit_energies))

    def ok_entries(self) -> List[SweepEntry]:
        return [en for en in self.entries if en.solution is not None]

    def mass_slope(self) -> float:
        """Least-squares slope of ``log ∫_{outside} u^2`` against ``log ε``."""
        ok = self.ok_entries()
        eps = np.array([en.epsilon for en in ok])
        mass = np.array([en.solution.outside_mass for en in ok])
        if len(ok) < 2 or np.any(mass <= 0):
            return float("nan")
        return float(np.polyfit(np.log(eps), np.log(mass), 1)[0])

    def rows(self) -> List[Dict[str, object]]:
        out = []
        for en in self.entries:
            sol = en.solution
            for i in range(len(self.limit_energies)):
                if sol is None:
                    out.append({"epsilon": en.epsilon, "well": i, "peak_x": "", "peak_y": "",
                                "peak_z": "", "dist_to_M": "", "gamma": "", "Q": "",
                                "grad_resid": "", "decay_rate": "", "profile_L2_dist": "",
                                "error": en.error})
                    continue
                p = sol.peaks[i]
                px = ["", "", ""] if p is None else [float(c) for c in p]
                out.append({"epsilon": en.epsilon, "well": i, "peak_x": px[0], "peak_y": px[1],
                            "peak_z": px[2], "dist_to_M": sol.dist_to_M[i],
                            "gamma": sol.gamma_energy, "Q": sol.q_value,
                            "grad_resid": sol.grad_resid, "decay_rate": sol.decay_rate,
                            "profile_L2_dist": en.profile_dist[i], "error": ""})
        return out


def sweep_epsilon(eps_list: Sequence[float], pot: PotentialSpec, pen_template: PenalizationSpec,
                  nl: Nonlinearity, riesz: RieszOperator, ground_states: Sequence[GroundState] = None,
                  local_n: int = 64, delta_fraction: float = 0.1, beta_ratio: float = 0.9,
                  t_grid: Sequence[float] = None, decay_annulus: Tuple[float, float] = None,
                  grad_tol: float = 1e-5, newton_tol: float = 1e-8,
                  d_ratio: float = 0.2) -> ConcentrationReport:
    """Solve the penalised problem for each ``ε`` (descending) on one shared grid."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly descending")
    grid = riesz.grid
    if ground_states is None:
        local = make_grid(local_n, local_n * grid.spacing / 2)
        ground_states = limit_ground_states(pot, nl, RieszOperator(riesz.alpha, local))
    ansatz = make_ansatz(pot, ground_states, delta_fraction, beta_ratio)
    n_req, L_req = required_box(ansatz, eps_list[-1], grid.spacing)
    if grid.half_length < L_req - 1e-12:
        raise GridError(f"grid too small for epsilon={eps_list[-1]}: need half_length >= {L_req:g} "
                        f"(n >= {n_req} at spacing {grid.spacing:g})")
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    entries = []
    for e in eps_list:
        pen = replace(pen_template, epsilon=e)
        try:
            profiles = [path_profile(ansatz, pen, i, t_grid, nl, riesz.alpha) for i in range(pot.k)]
            D, _, _ = aggregate_paths(profiles)
            guess = build_initial_guess(ansatz, pen, grid)
            sol = solve_penalized(guess, pot, pen, nl, riesz, grad_tol=grad_tol,
                                  newton_tol=newton_tol, energy_cap=2 * D, d_ratio=d_ratio,
                                  decay_annulus=decay_annulus)
            dists = [profile_distance(sol, pot, i, ansatz.ground_states[i]) for i in range(pot.k)]
            entries.append(SweepEntry(e, sol, profiles, dists, D))
        except (ConvergenceError, ValueError) as exc:
            log.error("epsilon=%g failed: %s", e, exc)
            entries.append(SweepEntry(e, None, [], [], float("nan"), error=str(exc)))
    return ConcentrationReport(entries, list(ansatz.limit_energies), pen_template.mu)
