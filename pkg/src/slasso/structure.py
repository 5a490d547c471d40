"""Structure matrices ``J`` for the quadratic penalty ``mu * |J beta|_2^2``.

Also the data augmentation that turns the quadratic-penalized problem into
a plain Lasso on ``(n + m) x p`` stacked data.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numkernel import DimensionError, as_matrix, as_vector


class StructureKind(str, enum.Enum):
    LASSO = "lasso"
    ELASTIC_NET = "en"
    SMOOTH_LASSO = "slasso"
    WEIGHTED_FUSION = "wfusion"
    CUSTOM = "custom"


@dataclass(frozen=True)
class StructureMatrix:
    """``J`` (m x p) together with its Gram form ``Jtilde = J'J``."""

    kind: StructureKind
    J: np.ndarray
    Jtilde: np.ndarray

    @property
    def m(self) -> int:
        return self.J.shape[0]

    @property
    def p(self) -> int:
        return self.J.shape[1]


@dataclass(frozen=True)
class AugmentedProblem:
    Xaug: np.ndarray
    yaug: np.ndarray
    n_original: int
    mu: float


def first_difference(p: int) -> np.ndarray:
    """The smoothing matrix: a zero first row, then ``beta_{j-1} - beta_j`` rows."""
    J = np.zeros((p, p))
    idx = np.arange(1, p)
    J[idx, idx - 1] = 1.0
    J[idx, idx] = -1.0
    return J


def fusion_matrix(X, weights=None) -> np.ndarray:
    """Weighted-fusion ``J`` from the sample correlations of ``X``.

    Diagonal ``w_kk``; off-diagonal ``-sign(X_j'X_k/n) * w_jk``. Default
    weights are ``|X_j'X_k / n|``, one admissible correlation-driven choice.
    """
    X = as_matrix(X, "X")
    n, p = X.shape
    corr = X.T @ X / n
    if weights is None:
        w = np.abs(corr)
    else:
        w = as_matrix(weights, "weights")
        if w.shape != (p, p):
            raise DimensionError(f"weights must be {p}x{p}, got {w.shape[0]}x{w.shape[1]}")
        if np.any(w < 0.0):
            raise ValueError("fusion weights must be non-negative")
        if not np.allclose(w, w.T, rtol=0.0, atol=1e-12):
            raise ValueError("fusion weights must be symmetric")
    J = -np.sign(corr) * w
    np.fill_diagonal(J, np.diag(w))
    return J


def build_structure(kind, p: int, *, X=None, weights=None, matrix=None) -> StructureMatrix:
    """Construct the structure matrix for ``kind`` in dimension ``p``.

    ``X`` (and optionally ``weights``) are required for weighted fusion;
    ``matrix`` for a custom structure.
    """
    kind = StructureKind(kind)
    p = int(p)
    minimum = 2 if kind in (StructureKind.SMOOTH_LASSO, StructureKind.WEIGHTED_FUSION) else 1
    if p < minimum:
        raise ValueError(f"{kind.value} structure needs p >= {minimum}, got {p}")
    if kind is StructureKind.LASSO:
        J = np.zeros((p, p))
    elif kind is StructureKind.ELASTIC_NET:
        J = np.eye(p)
    elif kind is StructureKind.SMOOTH_LASSO:
        J = first_difference(p)
    elif kind is StructureKind.WEIGHTED_FUSION:
        if X is None:
            raise ValueError("weighted fusion needs the design X")
        J = fusion_matrix(X, weights)
        if J.shape[1] != p:
            raise DimensionError(f"design has {J.shape[1]} columns, expected {p}")
    else:
        if matrix is None:
            raise ValueError("custom structure needs an explicit matrix")
        J = as_matrix(matrix, "J").copy()
        if J.shape[1] != p:
            raise DimensionError(f"custom J must have {p} columns, got {J.shape[1]}")
    return from_matrix(J, kind)


def from_matrix(J, kind=StructureKind.CUSTOM) -> StructureMatrix:
    J = as_matrix(J, "J").copy()
    Jtilde = J.T @ J
    Jtilde = 0.5 * (Jtilde + Jtilde.T)
    J.setflags(write=False)
    Jtilde.setflags(write=False)
    return StructureMatrix(StructureKind(kind), J, Jtilde)


def load_custom_csv(path) -> StructureMatrix:
    """Read a custom ``J`` from CSV: one row per line, comma separated, no header."""
    from .io import read_matrix_csv

    return from_matrix(read_matrix_csv(path), StructureKind.CUSTOM)


def quad_penalty(beta, S: StructureMatrix) -> float:
    """``|J beta|_2^2`` (the quadratic penalty without its ``mu`` factor)."""
    beta = as_vector(beta, "beta")
    if beta.shape[0] != S.p:
        raise DimensionError(f"beta has length {beta.shape[0]}, structure expects {S.p}")
    r = S.J @ beta
    return float(r @ r)


def smoothness(beta) -> float:
    """Sum of squared successive differences of ``beta``."""
    beta = as_vector(beta, "beta")
    if beta.shape[0] < 2:
        raise ValueError("smoothness needs at least two coefficients")
    d = np.diff(beta)
    return float(d @ d)


def augment(X, y, S: StructureMatrix, mu: float) -> AugmentedProblem:
    """Stack ``sqrt(n mu) J`` under ``X`` and zeros under ``y``."""
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    n, p = X.shape
    if p != S.p:
        raise DimensionError(f"X has {p} columns, structure expects {S.p}")
    if y.shape[0] != n:
        raise DimensionError(f"y has length {y.shape[0]}, X has {n} rows")
    mu = float(mu)
    if not mu >= 0.0:
        raise ValueError(f"mu must be non-negative, got {mu}")
    Xaug = np.vstack([X, math.sqrt(n * mu) * S.J])
    yaug = np.concatenate([y, np.zeros(S.m)])
    return AugmentedProblem(Xaug, yaug, n, mu)


def interaction_set(beta_star, S: StructureMatrix) -> np.ndarray:
    """Support of ``beta_star`` plus every index coupled to it through ``Jtilde``.

    For the smoothing matrix this is the support and its immediate
    neighbours; for the identity it is the support itself.
    """
    beta_star = as_vector(beta_star, "beta_star")
    support = np.flatnonzero(beta_star != 0.0)
    if support.size == 0:
        return support
    coupled = np.any(S.Jtilde[:, support] != 0.0, axis=1)
    mask = coupled.copy()
    mask[support] = True
    return np.flatnonzero(mask)
