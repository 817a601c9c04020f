"""Randomized local-in-time reduced bases for parabolic problems."""
from .fem import ProblemSpec, StructuredGrid
from .kernels import BACKEND
from .problems import builtin_problem
from .rbgen import RbParams, ReducedBasis, generate, pod_baseline
from .rom import ErrorReport, evaluate
from .sampling import (TimeSamplingDist, leverage_score_dist, squared_norm_dist,
                       uniform_dist)
from .timestep import Discretization, solve_trajectory

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Discretization", "ErrorReport", "ProblemSpec", "RbParams", "ReducedBasis",
    "StructuredGrid", "TimeSamplingDist", "builtin_problem", "evaluate", "generate",
    "leverage_score_dist", "pod_baseline", "solve_trajectory", "squared_norm_dist",
    "uniform_dist",
]
