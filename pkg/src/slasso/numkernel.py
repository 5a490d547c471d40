"""Dense linear algebra used throughout the package.

Matrices and vectors are plain float64 NumPy arrays; the helpers here
validate shape and finiteness on the way in. Cholesky and the symmetric
eigensolver (cyclic Jacobi) run in the compiled kernels when available.
"""

from __future__ import annotations

import numpy as np

from ._backend import kernels

SYMMETRY_TOL = 1e-12


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class NotSymmetricError(ValueError):
    """A symmetric matrix was required."""


class NotPositiveDefiniteError(ValueError):
    """Cholesky met a non-positive pivot."""

    def __init__(self, pivot: int):
        super().__init__(f"matrix is not positive definite (pivot {pivot} is not > 0)")
        self.pivot = pivot


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Return a C-contiguous float64 2-D copy-free view of ``A``, checked finite."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def as_vector(v, name: str = "vector") -> np.ndarray:
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def matvec(A, v) -> np.ndarray:
    A = as_matrix(A)
    v = as_vector(v)
    if A.shape[1] != v.shape[0]:
        raise DimensionError(
            f"cannot multiply {A.shape[0]}x{A.shape[1]} matrix by vector of length {v.shape[0]}"
        )
    return A @ v


def check_symmetric(A, tol: float = SYMMETRY_TOL) -> np.ndarray:
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"matrix must be square, got {A.shape[0]}x{A.shape[1]}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and float(np.max(np.abs(A - A.T))) > tol * scale:
        raise NotSymmetricError("matrix is not symmetric within tolerance")
    return A


def cholesky(A) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == A``.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot is not strictly positive.
    """
    A = check_symmetric(A)
    L, pivot = kernels.cholesky_lower(A)
    if pivot >= 0:
        raise NotPositiveDefiniteError(int(pivot))
    return L


def sym_eigvals(A, tol: float = 1e-15, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi sweeps."""
    A = check_symmetric(A)
    if A.shape[0] == 0:
        return np.zeros(0)
    vals, _ = kernels.jacobi_eigvals(A, tol, max_sweeps)
    return np.sort(np.asarray(vals, dtype=np.float64))


def lambda_max(A, iters: int = 100, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of a PSD matrix.

    Converges from below; callers that need a true upper bound must
    safeguard it (the solver backtracks).
    """
    A = as_matrix(A)
    p = A.shape[0]
    if p == 0:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(p)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = A @ v
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0
        new = float(v @ w)
        v = w / nrm
        if abs(new - est) <= 1e-10 * abs(new):
            est = new
            break
        est = new
    return max(est, 0.0)
