"""Ground states of ``-Δu + a u = (I_α * F(u)) f(u)`` and the curve ``a -> E_a``.

Each solve runs in two phases.  A Pohozaev-projected fixed-point iteration
(``source_iteration`` or ``sobolev_flow``) provides globalisation from a
Gaussian seed; every iterate is rescaled in space onto the Pohozaev
manifold.  The projection uses the continuum dilation laws, which the
discrete problem obeys only up to truncation error, so the projected map
stalls at a small but nonzero residual.  A Newton-MINRES polish then drives
the discrete residual to tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .field import (DIM, GridSpec, ScalarField, check_same_grid, dilate,
                    helmholtz_inverse_values, helmholtz_values)
from .functionals import LimitProblem
from .newton import ConvergenceError, newton_krylov
from .nonlinearity import Nonlinearity
from .riesz import RieszOperator

log = logging.getLogger(__name__)

METHODS = ("source_iteration", "sobolev_flow")


@dataclass
class SolverOptions:
    grad_tol: float = 1e-6
    pohozaev_tol: float = 1e-3
    max_iter: int = 5000
    switch_tol: float = 1e-2      # hand over to Newton below this residual
    stall_window: int = 10        # ... or when the residual stops improving
    tau: float = 0.5              # sobolev_flow initial step
    newton_tol: float = 1e-9
    newton_max_iter: int = 40


@dataclass
class GroundState:
    a: float
    U: ScalarField
    energy: float
    pohozaev_resid: float
    grad_resid: float
    method: str
    A: float = 0.0
    B: float = 0.0
    C: float = 0.0
    iterations: int = 0
    newton_iterations: int = 0
    history: List[float] = field(default_factory=list)

    def energy_identity_error(self, alpha: float) -> float:
        """Relative gap to ``(2+α)/(2(N+α)) A + αa/(2(N+α)) B``."""
        rhs = (2 + alpha) / (2 * (DIM + alpha)) * self.A + alpha * self.a / (2 * (DIM + alpha)) * self.B
        return abs(self.energy - rhs) / abs(self.energy)


def pohozaev_root(A: float, B: float, C: float, a: float, alpha: float) -> float:
    """Positive root of ``(N-2)/2 A t^{N-2} + N/2 aB t^N - (N+α)/2 C t^{N+α}``."""
    if not C > 0:
        raise ValueError("nonlocal term nonpositive; initialization outside the mountain-pass cone")

    # divided by t^{N-2} = t: decreasing from A/2 > 0 to -inf past its maximum
    def h(t):
        return (DIM - 2) / 2 * A + DIM / 2 * a * B * t * t - (DIM + alpha) / 2 * C * t ** (2 + alpha)

    lo, hi = 1.0, 1.0
    while h(hi) > 0:
        hi *= 2
    while h(lo) < 0:
        lo /= 2
    if lo == hi:
        return 1.0
    return brentq(h, lo, hi, xtol=1e-15, rtol=1e-15)


def pohozaev_project(u: ScalarField, a: float, nl: Nonlinearity, riesz: RieszOperator,
                     order: int = 1) -> Tuple[float, ScalarField]:
    """Dilate ``u`` onto the Pohozaev manifold; returns ``(t*, u(·/t*))``."""
    check_same_grid(u.grid, riesz.grid)
    rep = LimitProblem(a, nl, riesz).pohozaev(u.values)
    t = pohozaev_root(rep.A, rep.B, rep.C, a, riesz.alpha)
    return t, dilate(u, t, order=order)


def gaussian_seed(grid: GridSpec, width: float = 1.0) -> np.ndarray:
    return np.exp(-grid.radius**2 / (2 * width**2))


def nehari_scale(problem: LimitProblem, u: np.ndarray) -> float:
    """``λ > 0`` with ``<grad(λu), λu> = 0``.

    ``λ·max u`` is at least the (F3) witness, so ``F`` is positive somewhere
    on the scaled seed.
    """
    dv = problem.grid.cell_volume
    nl = problem.nl
    A, B = problem.quadratic_parts(u)
    lin = A + problem.a * B
    witness = nl.check_hypotheses(problem.alpha).witness
    lo = witness / u.max()

    def h(lam):
        v = lam * u
        conv = problem.nonlocal_term.potential(v)
        return np.log(dv * np.vdot(conv * nl.f(v), u) / lam) - np.log(lin) if np.any(nl.F(v) > 0) else -np.inf

    hi = max(lo, 1.0)
    while h(hi) < 0:
        hi *= 2
        if hi > 1e8:
            raise ConvergenceError("cannot scale seed onto the Nehari manifold")
    if h(lo) >= 0:
        return lo
    return brentq(h, lo, hi, xtol=1e-12, rtol=1e-10)


def _recenter(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Roll so that the discrete maximum sits on the origin node."""
    idx = np.unravel_index(np.argmax(u), u.shape)
    shift = [grid.n // 2 - i for i in idx]
    return np.roll(u, shift, axis=(0, 1, 2))


def solve_ground_state(a: float, nl: Nonlinearity, riesz: RieszOperator, grid: GridSpec = None,
                       method: str = "sobolev_flow", seed_field: ScalarField = None,
                       options: SolverOptions = None) -> GroundState:
    """Least-energy solution of the limit problem on ``riesz.grid``."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    opts = options or SolverOptions()
    grid = grid or riesz.grid
    check_same_grid(grid, riesz.grid)
    nl.validate(riesz.alpha)
    prob = LimitProblem(a, nl, riesz)

    if seed_field is None:
        u = gaussian_seed(grid)
        u = nehari_scale(prob, u) * u
    else:
        check_same_grid(seed_field.grid, grid)
        u = np.array(seed_field.values, dtype=float)

    def resid(v, conv=None):
        return np.linalg.norm(prob.gradient(v, conv)) / max(np.linalg.norm(v), 1e-300)

    def project(v):
        rep = prob.pohozaev(v)
        t = pohozaev_root(rep.A, rep.B, rep.C, a, riesz.alpha)
        return dilate(ScalarField(grid, v), t).values

    u = project(u)
    history = [resid(u)]
    energy = prob.energy(u)
    tau = opts.tau
    it = 0
    best = history[0]
    since_best = 0
    while it < opts.max_iter and history[-1] > opts.switch_tol and since_best < opts.stall_window:
        it += 1
        conv = prob.nonlocal_term.potential(u)
        if method == "source_iteration":
            new = project(helmholtz_inverse_values(grid, conv * nl.f(u), a))
        else:
            step = helmholtz_inverse_values(grid, prob.gradient(u, conv), a)
            while True:
                new = project(u - tau * step)
                e_new = prob.energy(new)
                if e_new <= energy or tau < 1e-4:
                    break
                tau *= 0.5
            energy = e_new
        if np.linalg.norm(new) < 1e-8 * np.sqrt(new.size):
            raise ConvergenceError("trivial attractor; reseed", history)
        u = new
        history.append(resid(u))
        if history[-1] < best * 0.99:
            best, since_best = history[-1], 0
        else:
            since_best += 1
        log.debug("%s %d: residual %.3e", method, it, history[-1])

    try:
        out = newton_krylov(u, prob.gradient, prob.linearization,
                            lambda r: helmholtz_inverse_values(grid, r, a),
                            lambda v: helmholtz_values(grid, v, a),
                            tol=min(opts.newton_tol, opts.grad_tol), max_iter=opts.newton_max_iter)
        newton_hist, u = out.history, out.u
    except ConvergenceError as exc:
        # a round-off floor above newton_tol is fine once grad_tol is met
        if exc.state is None or not exc.history or exc.history[-1] > opts.grad_tol:
            raise
        newton_hist, u = exc.history, exc.state
    history.extend(newton_hist[1:])
    if np.linalg.norm(u) < 1e-8 * np.sqrt(u.size):
        raise ConvergenceError("trivial attractor; reseed", history)
    u = _recenter(u, grid)
    g_res = resid(u)
    if not g_res <= opts.grad_tol:
        raise ConvergenceError(f"ground state solve did not converge: residual {g_res:.3e}",
                               history, u)
    rep = prob.pohozaev(u)
    return GroundState(a=float(a), U=ScalarField(grid, u), energy=prob.energy(u),
                       pohozaev_resid=rep.relative, grad_resid=g_res, method=method,
                       A=rep.A, B=rep.B, C=rep.C, iterations=it,
                       newton_iterations=len(newton_hist) - 1, history=history)


def energy_curve(a_list: Sequence[float], nl: Nonlinearity, riesz: RieszOperator,
                 grid: GridSpec = None, method: str = "sobolev_flow",
                 options: SolverOptions = None) -> List[Tuple[float, float]]:
    """``[(a, E_a)]`` with each solve warm-started from the previous ground state."""
    a_list = [float(a) for a in a_list]
    if any(a <= 0 for a in a_list):
        raise ValueError("a values must be positive")
    if any(b < a for a, b in zip(a_list, a_list[1:])):
        raise ValueError("a_list must be sorted ascending")
    out = []
    prev = None
    for a in a_list:
        gs = solve_ground_state(a, nl, riesz, grid, method, seed_field=prev, options=options)
        out.append((a, gs.energy))
        prev = gs.U
    return out


def scaling_exponent(p: float, alpha: float) -> float:
    """Exponent ``e`` in ``E_a = E_1 a^e`` for ``F(s) = s^p/p``.

    From ``u(x) = a^θ w(√a x)`` with ``θ = (2+α)/(4(p-1))``, giving
    ``e = 2θ + 1 - N/2``.
    """
    theta = (2 + alpha) / (4 * (p - 1))
    return 2 * theta + 1 - DIM / 2


def g1(t, alpha: float):
    t = np.asarray(t, dtype=float)
    return t ** (DIM - 2) / 2 - (DIM - 2) / (DIM + alpha) * t ** (DIM + alpha) / 2


def g2(t, alpha: float):
    t = np.asarray(t, dtype=float)
    return t**DIM / 2 - DIM / (DIM + alpha) * t ** (DIM + alpha) / 2


@dataclass
class DilationProfile:
    t: np.ndarray
    values: np.ndarray       # L_a(U(·/t)) from dilated fields
    law: np.ndarray          # g1(t) A + g2(t) a B
    argmax: float
    A: float
    B: float


def dilation_profile(U: ScalarField, a: float, nl: Nonlinearity, riesz: RieszOperator,
                     t_grid: Sequence[float]) -> DilationProfile:
    """Sample ``t -> L_a(U(·/t))`` by cubic-spline dilation and by the ``g1/g2`` law."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise ValueError("t_grid must be positive")
    prob = LimitProblem(a, nl, riesz)
    values = np.array([prob.energy(dilate(U, t, order=3).values) for t in t_grid])
    A, B = prob.quadratic_parts(U.values)
    law = g1(t_grid, riesz.alpha) * A + g2(t_grid, riesz.alpha) * a * B
    return DilationProfile(t_grid, values, law, float(t_grid[np.argmax(values)]), A, B)
