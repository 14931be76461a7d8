"""Isotonic L2 projection of estimates and confidence bands on rectangular grids."""

from .bands import Band, BandComparison, BandError, compare_bands, construct_wald, correct_band, multiplier_band
from .interpolate import Interpolator, Scheme
from .isotonic import (
    ProjectionResult,
    SolverConfig,
    ViolationDiagnostic,
    lemma3_bound_check,
    local_oscillation,
    oracle_minmax,
    pava,
    project_monotone,
    violation_diagnostic,
)
from .lattice import GridFunction, GridIndex, Lattice, LatticeError, mesh, partial_le

__version__ = "0.1.0"

__all__ = [
    "Band",
    "BandComparison",
    "BandError",
    "GridFunction",
    "GridIndex",
    "Interpolator",
    "Lattice",
    "LatticeError",
    "ProjectionResult",
    "Scheme",
    "SolverConfig",
    "ViolationDiagnostic",
    "compare_bands",
    "construct_wald",
    "correct_band",
    "lemma3_bound_check",
    "local_oscillation",
    "mesh",
    "multiplier_band",
    "oracle_minmax",
    "pava",
    "partial_le",
    "project_monotone",
    "violation_diagnostic",
]
