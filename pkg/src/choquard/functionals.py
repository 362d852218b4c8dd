"""Energies, L^2 gradients and linearisations for the limit and penalised problems.

Limit problem (constant potential ``a``)::

    L_a(u) = 1/2 ∫ |∇u|^2 + a u^2 - 1/2 ∫ (I_α * F(u)) F(u)

Penalised problem on the rescaled grid, ``V_ε(x) = V(εx)``::

    P_ε(u) = 1/2 ∫ |∇u|^2 + V_ε u^2 - 1/2 ∫ (I_α * F(u)) F(u)
    Q_ε(u) = (∫ χ_ε u^2 - 1)_+^2
    Γ_ε = P_ε + Q_ε

Gradients are with respect to the rectangle-rule L^2 inner product, so
``dE(u)[φ] = h^3 Σ grad(u) φ`` holds exactly up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .field import DIM, ScalarField, check_same_grid, dirichlet_energy, laplacian_values
from .nonlinearity import Nonlinearity
from .potential import PenalizationSpec, PotentialSpec, build_chi as _chi, scaled_potential
from .riesz import RieszOperator


class NonlocalTerm:
    """``u -> (I_α * F(u)) f(u)`` and its pieces."""

    def __init__(self, nl: Nonlinearity, riesz: RieszOperator):
        self.nl = nl
        self.riesz = riesz
        self.grid = riesz.grid
        self.alpha = riesz.alpha

    def potential(self, u: np.ndarray) -> np.ndarray:
        return self.riesz.apply(self.nl.F(u))

    def energy(self, u: np.ndarray, conv: np.ndarray = None) -> float:
        """``∫ (I_α * F(u)) F(u)``."""
        Fu = self.nl.F(u)
        if conv is None:
            conv = self.riesz.apply(Fu)
        return float(self.grid.cell_volume * np.vdot(conv, Fu))

    def linearization(self, u: np.ndarray, conv: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        """Derivative of ``(I*F(u)) f(u)`` at ``u``."""
        fu = self.nl.f(u)
        dfu = self.nl.df(u)

        def apply(phi):
            return self.riesz.apply(fu * phi, check=False) * fu + conv * dfu * phi
        return apply


@dataclass
class PohozaevReport:
    A: float  # ∫|∇u|^2
    B: float  # ∫u^2
    C: float  # ∫(I_α*F(u))F(u)
    P: float
    alpha: float

    @property
    def relative(self) -> float:
        """``|P|`` relative to ``(N+α)/2 · C``."""
        scale = (DIM + self.alpha) / 2 * self.C
        return abs(self.P) / scale if scale else abs(self.P)


class LimitProblem:
    """``-Δu + a u = (I_α * F(u)) f(u)`` on the grid of ``riesz``."""

    def __init__(self, a: float, nl: Nonlinearity, riesz: RieszOperator):
        if not a > 0:
            raise ValueError(f"a must be positive, got {a}")
        self.a = float(a)
        self.nl = nl
        self.riesz = riesz
        self.grid = riesz.grid
        self.alpha = riesz.alpha
        self.nonlocal_term = NonlocalTerm(nl, riesz)

    def quadratic_parts(self, u: np.ndarray):
        A = dirichlet_energy(self.grid, u)
        B = float(self.grid.cell_volume * np.vdot(u, u))
        return A, B

    def pohozaev(self, u: np.ndarray) -> PohozaevReport:
        A, B = self.quadratic_parts(u)
        C = self.nonlocal_term.energy(u)
        P = (DIM - 2) / 2 * A + DIM / 2 * self.a * B - (DIM + self.alpha) / 2 * C
        return PohozaevReport(A, B, C, P, self.alpha)

    def energy(self, u: np.ndarray) -> float:
        A, B = self.quadratic_parts(u)
        return 0.5 * (A + self.a * B) - 0.5 * self.nonlocal_term.energy(u)

    def gradient(self, u: np.ndarray, conv: np.ndarray = None) -> np.ndarray:
        if conv is None:
            conv = self.nonlocal_term.potential(u)
        return -laplacian_values(self.grid, u) + self.a * u - conv * self.nl.f(u)

    def linearization(self, u: np.ndarray, conv: np.ndarray = None):
        if conv is None:
            conv = self.nonlocal_term.potential(u)
        dN = self.nonlocal_term.linearization(u, conv)

        def apply(phi):
            return -laplacian_values(self.grid, phi) + self.a * phi - dN(phi)
        return apply


@dataclass
class EnergyReport:
    total: float
    kinetic: float    # ∫|∇u|^2
    potential: float  # ∫V_ε u^2
    nonlocal_: float  # ∫(I_α*F(u))F(u)
    penalty: float    # Q_ε(u)
    outside_mass: float = 0.0  # ∫χ_ε u^2

    @property
    def P(self) -> float:
        return self.total - self.penalty

    def consistency_error(self) -> float:
        expect = 0.5 * (self.kinetic + self.potential) - 0.5 * self.nonlocal_ + self.penalty
        return abs(self.total - expect) / max(abs(expect), 1e-300)


class PenalizedProblem:
    """Critical points of ``Γ_ε = P_ε + Q_ε`` on the rescaled grid.

    With ``chi_well = i`` the penalty uses ``χ_ε^i`` (the functional ``Γ_ε^i``).
    ``offset`` shifts the grid origin to ``x = offset``.
    """

    def __init__(self, pot: PotentialSpec, pen: PenalizationSpec, nl: Nonlinearity,
                 riesz: RieszOperator, chi_well: int = None, offset=None):
        self.pot = pot
        self.pen = pen
        self.nl = nl
        self.riesz = riesz
        self.grid = riesz.grid
        self.nonlocal_term = NonlocalTerm(nl, riesz)
        self.V = scaled_potential(self.grid, pot, pen.epsilon, offset)
        self.chi = _chi(self.grid, pot, pen, chi_well, offset)

    def outside_mass(self, u: np.ndarray) -> float:
        return float(self.grid.cell_volume * np.vdot(self.chi * u, u))

    def penalty_weight(self, u: np.ndarray) -> float:
        """``(∫χ_ε u^2 - threshold)_+``."""
        return max(self.outside_mass(u) - self.pen.threshold, 0.0)

    def energy_report(self, u: np.ndarray) -> EnergyReport:
        dv = self.grid.cell_volume
        kin = dirichlet_energy(self.grid, u)
        pot = float(dv * np.vdot(self.V * u, u))
        nonloc = self.nonlocal_term.energy(u)
        mass = self.outside_mass(u)
        q = max(mass - self.pen.threshold, 0.0) ** 2
        total = 0.5 * (kin + pot) - 0.5 * nonloc + q
        return EnergyReport(total, kin, pot, nonloc, q, mass)

    def energy(self, u: np.ndarray) -> float:
        return self.energy_report(u).total

    def effective_potential(self, u: np.ndarray) -> np.ndarray:
        """``Ṽ_ε = V_ε + 4 (∫χ_ε u^2 - 1)_+ χ_ε``."""
        return self.V + 4 * self.penalty_weight(u) * self.chi

    def gradient(self, u: np.ndarray, conv: np.ndarray = None) -> np.ndarray:
        if conv is None:
            conv = self.nonlocal_term.potential(u)
        return (-laplacian_values(self.grid, u) + self.effective_potential(u) * u
                - conv * self.nl.f(u))

    def linearization(self, u: np.ndarray, conv: np.ndarray = None):
        if conv is None:
            conv = self.nonlocal_term.potential(u)
        dN = self.nonlocal_term.linearization(u, conv)
        vt = self.effective_potential(u)
        dv = self.grid.cell_volume
        active = self.outside_mass(u) > self.pen.threshold
        chi_u = self.chi * u

        def apply(phi):
            out = -laplacian_values(self.grid, phi) + vt * phi - dN(phi)
            if active:
                out += 8 * dv * np.vdot(chi_u, phi) * chi_u
            return out
        return apply


# --- field-level API ----------------------------------------------------------

def eval_f(nl: Nonlinearity, u: ScalarField) -> ScalarField:
    return ScalarField(u.grid, nl.f(u.values))


def eval_F(nl: Nonlinearity, u: ScalarField) -> ScalarField:
    return ScalarField(u.grid, nl.F(u.values))


def energy_limit(u: ScalarField, a: float, nl: Nonlinearity, riesz: RieszOperator) -> float:
    check_same_grid(u.grid, riesz.grid)
    return LimitProblem(a, nl, riesz).energy(u.values)


def grad_limit(u: ScalarField, a: float, nl: Nonlinearity, riesz: RieszOperator) -> ScalarField:
    check_same_grid(u.grid, riesz.grid)
    return ScalarField(u.grid, LimitProblem(a, nl, riesz).gradient(u.values))


def pohozaev(u: ScalarField, a: float, nl: Nonlinearity, riesz: RieszOperator) -> PohozaevReport:
    check_same_grid(u.grid, riesz.grid)
    return LimitProblem(a, nl, riesz).pohozaev(u.values)


def build_chi(pot: PotentialSpec, pen: PenalizationSpec, grid, i: int = None) -> ScalarField:
    return ScalarField(grid, _chi(grid, pot, pen, i))


def energy_penalized(u: ScalarField, pot: PotentialSpec, pen: PenalizationSpec,
                     nl: Nonlinearity, riesz: RieszOperator) -> EnergyReport:
    check_same_grid(u.grid, riesz.grid)
    return PenalizedProblem(pot, pen, nl, riesz).energy_report(u.values)


def grad_penalized(u: ScalarField, pot: PotentialSpec, pen: PenalizationSpec,
                   nl: Nonlinearity, riesz: RieszOperator) -> ScalarField:
    check_same_grid(u.grid, riesz.grid)
    return ScalarField(u.grid, PenalizedProblem(pot, pen, nl, riesz).gradient(u.values))
