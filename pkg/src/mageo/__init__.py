"""Finite-difference eps-geodesics between Kähler potentials on the flat torus."""

__version__ = "0.1.0"

from .grid import GridSpec, HermitianSlot, ScalarField, make_grid  # noqa: E402
from .fieldio import read_field, write_field  # noqa: E402
from .solver import NewtonConfig, SolveReport, newton_solve  # noqa: E402
from .geodesic import build_problem, builtin_pair, default_schedule, solve_geodesic  # noqa: E402

__all__ = [
    "GridSpec", "HermitianSlot", "NewtonConfig", "ScalarField", "SolveReport", "build_problem",
    "builtin_pair", "default_schedule", "make_grid", "newton_solve", "read_field",
    "solve_geodesic", "write_field",
]
