"""Ground states and semiclassical spikes of the Choquard equation in three dimensions."""

__version__ = "0.1.0"

from .field import GridError, GridSpec, ScalarField, make_grid
from .limit import GroundState, SolverOptions, energy_curve, solve_ground_state
from .newton import ConvergenceError
from .nonlinearity import Nonlinearity
from .potential import PenalizationSpec, PotentialSpec, preset
from .riesz import RieszOperator

__all__ = ["ConvergenceError", "GridError", "GridSpec", "GroundState", "Nonlinearity",
           "PenalizationSpec", "PotentialSpec", "RieszOperator", "ScalarField", "SolverOptions",
           "energy_curve", "make_grid", "preset", "solve_ground_state"]
