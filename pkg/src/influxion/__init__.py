"""Chebyshev spectral Poisson solver on a rectangle coupled to a free-space exterior."""

__version__ = "0.1.0"

from .bench import SourceSpec, analytic_reference, relative_error, source_field
from .estimator import CoupledPoissonSolver
from .exterior import SideDensity, build_basis, density_amplitude, single_layer_value
from .influence import InfluenceSystem, assemble, condition_number, solve_coupled
from .interior import BoundaryTrace, DirichletSolver, Geometry, Side, solve_dirichlet
from .validation import (
    DegenerateSegmentError,
    DimensionError,
    QuadratureError,
    SolverError,
)

__all__ = [
    "BoundaryTrace",
    "CoupledPoissonSolver",
    "DegenerateSegmentError",
    "DimensionError",
    "DirichletSolver",
    "Geometry",
    "InfluenceSystem",
    "QuadratureError",
    "Side",
    "SideDensity",
    "SolverError",
    "SourceSpec",
    "analytic_reference",
    "assemble",
    "build_basis",
    "condition_number",
    "density_amplitude",
    "relative_error",
    "single_layer_value",
    "solve_coupled",
    "solve_dirichlet",
    "source_field",
]
