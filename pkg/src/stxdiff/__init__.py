"""Space-time Galerkin solver for cross-diffusion systems in entropy variables.

One spatial dimension times time; continuous Lagrange elements on the
space-time cylinder, damped Newton with sparse LU, and the experiment
drivers behind the ``stxdiff`` command line.
"""
from ._backend import USE_NUMBA
from .assembly import ResidualContext, SchemeConfig
from .entropy import BoltzmannEntropy, LogisticEntropy, ScaledLogEntropy
from .errors import (
    DomainError, HypothesisViolation, InvalidArgument, NumericError, OutOfDomain, SolverError,
    StxdiffError, Unsupported,
)
from .fespace import FeSpace, build_space
from .mesh import SpaceTimeMesh, Tag, build_cartesian, build_simplicial
from .models import CrossDiffusionSystem, verify_hypotheses
from .solver import NewtonConfig, SolveReport, eps_continuation, newton_solve, slab_solve

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA", "ResidualContext", "SchemeConfig", "BoltzmannEntropy", "LogisticEntropy",
    "ScaledLogEntropy", "DomainError", "HypothesisViolation", "InvalidArgument", "NumericError",
    "OutOfDomain", "SolverError", "StxdiffError", "Unsupported", "FeSpace", "build_space",
    "SpaceTimeMesh", "Tag", "build_cartesian", "build_simplicial", "CrossDiffusionSystem",
    "verify_hypotheses", "NewtonConfig", "SolveReport", "eps_continuation", "newton_solve",
    "slab_solve", "__version__",
]
