"""Lasso with quadratic structure penalties.

The estimator minimizes ``||y - Xb||_n^2 + lam |b|_1 + mu b' Jtilde b`` for a
structure matrix ``J`` (zero, identity, first differences, weighted fusion
or user supplied). See :mod:`slasso.solver` for the optimality convention.
"""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .solver import (  # noqa: E402
    FitResult,
    PenaltyConfig,
    SolverSettings,
    fit,
    fused_lasso_fit,
    kkt_oracle_fit,
    objective,
    soft_threshold,
    tv_prox,
)
from .structure import StructureKind, StructureMatrix, augment, build_structure  # noqa: E402

__all__ = [
    "BACKEND",
    "FitResult",
    "PenaltyConfig",
    "SolverSettings",
    "StructureKind",
    "StructureMatrix",
    "augment",
    "build_structure",
    "fit",
    "fused_lasso_fit",
    "kkt_oracle_fit",
    "objective",
    "soft_threshold",
    "tv_prox",
]
