"""Shifted inexact Newton with matrix-free MINRES inner solves.

The Jacobians here are Hessians of energies: symmetric, indefinite at the
mountain-pass saddles we are after, and nearly singular along the soft
translation modes of spikes sitting in flat wells.  Each step solves

    (J + σ S) s = -R

with ``S`` the SPD Helmholtz operator the preconditioner inverts.  A
positive shift σ caps the step along near-zero eigenvalues (a
Levenberg-Marquardt regularisation); it is reduced as soon as steps make
progress so the final iterations are plain Newton and converge
quadratically.  The shift stays well below the O(1) negative eigenvalue, so
the saddle is not turned into a minimum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np
from scipy.sparse.linalg import LinearOperator, minres

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message, history=None, state=None):
        super().__init__(message)
        self.history = history or []
        self.state = state


@dataclass
class NewtonResult:
    u: np.ndarray
    residual: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)
    matvecs: int = 0


def newton_krylov(u0: np.ndarray, residual: Callable, linearization: Callable,
                  precondition: Callable, shift_operator: Callable = None,
                  tol: float = 1e-10, max_iter: int = 40, sigma0: float = 0.1,
                  sigma_max: float = 0.5, inner_tol: float = 1e-3, inner_maxiter: int = 200,
                  energy: Callable = None, energy_cap: float = None) -> NewtonResult:
    """Find a zero of ``residual`` starting from ``u0``.

    ``residual(u)`` returns the gradient field; ``linearization(u)`` returns a
    callable applying its derivative; ``precondition(r)`` approximates the
    inverse of ``shift_operator`` (default: identity).  Convergence is
    ``||R(u)|| <= tol ||u||``.  A step is accepted when it lowers ``||R||``;
    otherwise σ grows, and past ``sigma_max`` the unshifted direction is
    backtracked instead.  With ``energy`` and ``energy_cap`` given, an
    iterate whose energy exceeds the cap raises :class:`ConvergenceError`.
    """
    u = np.array(u0, dtype=float, copy=True)
    shape = u.shape
    size = u.size
    shift_op = shift_operator or (lambda v: v)
    count = [0]

    def solve(J, rhs, sigma):
        def mv(v):
            count[0] += 1
            v = v.reshape(shape)
            out = J(v)
            if sigma:
                out = out + sigma * shift_op(v)
            return out.ravel()
        A = LinearOperator((size, size), matvec=mv, dtype=float)
        M = LinearOperator((size, size), matvec=lambda v: precondition(v.reshape(shape)).ravel(),
                           dtype=float)
        step, _ = minres(A, rhs.ravel(), M=M, rtol=inner_tol, maxiter=inner_maxiter)
        return step.reshape(shape)

    r = residual(u)
    rnorm = np.linalg.norm(r)
    res = rnorm / max(np.linalg.norm(u), 1e-300)
    history = [res]
    sigma = sigma0
    for it in range(1, max_iter + 1):
        if res <= tol:
            return NewtonResult(u, res, it - 1, True, history, count[0])
        J = linearization(u)
        accepted = False
        while sigma <= sigma_max:
            trial = u + solve(J, -r, sigma)
            rt = residual(trial)
            rt_norm = np.linalg.norm(rt)
            if rt_norm < rnorm:
                accepted = True
                ratio = rt_norm / rnorm
                sigma = sigma / 4 if ratio < 0.5 else sigma / 2 if ratio < 0.9 else sigma
                if sigma < 1e-4:
                    sigma = 0.0
                break
            sigma = max(4 * sigma, 1e-3)
        if not accepted:
            # plain Newton direction with backtracking
            step = solve(J, -r, 0.0)
            lam = 1.0
            while lam >= 1e-3:
                trial = u + lam * step
                rt = residual(trial)
                rt_norm = np.linalg.norm(rt)
                if rt_norm < rnorm:
                    break
                lam *= 0.5
            else:
                raise ConvergenceError(f"no descent step at residual {res:.3e}", history, u)
            sigma = sigma0
        u, r, rnorm = trial, rt, rt_norm
        res = rnorm / max(np.linalg.norm(u), 1e-300)
        history.append(res)
        log.debug("newton %d: residual %.3e (sigma %.3g, matvecs %d)", it, res, sigma, count[0])
        if energy is not None and energy_cap is not None:
            e = energy(u)
            if e > energy_cap:
                raise ConvergenceError(f"energy {e:.6g} exceeded cap {energy_cap:.6g}",
                                       history, u)
    return NewtonResult(u, res, max_iter, res <= tol, history, count[0])
