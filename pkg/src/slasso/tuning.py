"""Theoretical tuning constants and grid cross-validation over (lambda, mu)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .numkernel import DimensionError, as_matrix, as_vector, lambda_max
from .solver import SolverSettings, solve_gram
from .structure import StructureMatrix


class Variant(str, enum.Enum):
    THEOREM1 = "theorem1"
    COROLLARY1 = "corollary1"
    THEOREM3 = "theorem3"
    PROPOSITION1 = "proposition1"
    PROPOSITION2 = "proposition2"
    THEOREM4 = "theorem4"
    THEOREM5 = "theorem5"
    EXPERIMENTAL = "experimental"


class UnpenalizedStructureError(ValueError):
    """The truth lies in the null space of the structure, so mu is undefined."""


@dataclass(frozen=True)
class TheoreticalTuning:
    lambda_n: float
    mu_n: float
    eta: float
    variant: Variant

    def __post_init__(self):
        if not self.lambda_n > 0:
            raise ValueError("lambda_n must be positive")
        if not self.mu_n >= 0:
            raise ValueError("mu_n must be non-negative")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")


# lambda = const * sigma * sqrt(log(p / eta) / n)
_LAMBDA_CONST = {
    Variant.THEOREM1: 4.0 * math.sqrt(2.0),
    Variant.COROLLARY1: 4.0 * math.sqrt(2.0),
    Variant.PROPOSITION2: 4.0 * math.sqrt(2.0),
    Variant.PROPOSITION1: 2.0 * math.sqrt(2.0),
    Variant.THEOREM3: 8.0 * math.sqrt(2.0),
}

# which norm of Jtilde beta* the mu rule divides by, and the rule itself
_MU_L2 = {Variant.THEOREM1, Variant.COROLLARY1, Variant.PROPOSITION1, Variant.EXPERIMENTAL}
_MU_INF_DIVISOR = {
    Variant.THEOREM3: 8.0,
    Variant.PROPOSITION2: 4.0,
    Variant.THEOREM4: 4.0,
    Variant.THEOREM5: 4.0,
}


def _check_common(sigma, n, p, eta=None):
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    if int(n) < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if int(p) < 2:
        raise ValueError(f"p must be at least 2, got {p}")
    if eta is not None and not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")


def theoretical_lambda(sigma: float, n: int, p: int, eta: float = 0.1, variant=Variant.THEOREM1,
                       L: float | None = None) -> float:
    """Theoretical lambda for ``variant``.

    The experimental rule ignores ``eta``. The finite-variance rule needs the
    design statistic ``L`` (see :func:`slasso.diagnostics.assumption_E_L`).
    """
    variant = Variant(variant)
    if variant is Variant.EXPERIMENTAL:
        _check_common(sigma, n, p)
        return 2.0 * math.sqrt(2.0) * sigma * math.sqrt(math.log(p) / n)
    _check_common(sigma, n, p, eta)
    if variant is Variant.THEOREM5:
        if L is None:
            raise ValueError("the finite-variance rule needs L")
        return nongaussian_lambda(sigma, n, p, eta, L)
    if variant is Variant.THEOREM4:
        inner = math.sqrt(eta * p / (1.0 + p))
        return 16.0 * sigma * math.sqrt(math.log(p / inner) / n)
    return _LAMBDA_CONST[variant] * sigma * math.sqrt(math.log(p / eta) / n)


def structure_norm(beta_star, S: StructureMatrix, variant=Variant.COROLLARY1) -> float:
    """The norm of ``Jtilde beta*`` that the mu rule of ``variant`` divides by."""
    v = S.Jtilde @ as_vector(beta_star, "beta_star")
    if Variant(variant) in _MU_L2:
        return float(np.linalg.norm(v))
    return float(np.max(np.abs(v))) if v.size else 0.0


def theoretical_mu(lam: float, sparsity: int, structure_norm: float, variant=Variant.COROLLARY1) -> float:
    """Theoretical mu. ``structure_norm`` is ``|Jtilde beta*|_2`` for the
    l2-type rules (theorem1, corollary1, proposition1, experimental) and
    ``|Jtilde beta*|_inf`` for the others."""
    variant = Variant(variant)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not structure_norm >= 0 or not math.isfinite(structure_norm):
        raise ValueError(f"structure norm must be finite and non-negative, got {structure_norm}")
    if structure_norm == 0.0:
        raise UnpenalizedStructureError("Jtilde beta* = 0: the quadratic penalty does not bind, choose mu directly")
    if variant in _MU_L2:
        if int(sparsity) < 1:
            raise ValueError("sparsity must be at least 1")
        return lam * math.sqrt(sparsity) / (2.0 * structure_norm)
    return lam / (_MU_INF_DIVISOR[variant] * structure_norm)


def tuning_for_truth(sigma, n, beta_star, S: StructureMatrix, eta=0.1, variant=Variant.COROLLARY1,
                     L=None) -> TheoreticalTuning:
    """Both parameters for a known truth; mu falls back to 0 when the structure does not bind."""
    beta_star = as_vector(beta_star, "beta_star")
    p = beta_star.shape[0]
    lam = theoretical_lambda(sigma, n, p, eta, variant, L=L)
    s = int(np.count_nonzero(beta_star))
    try:
        mu = theoretical_mu(lam, s, structure_norm(beta_star, S, variant), variant)
    except UnpenalizedStructureError:
        mu = 0.0
    return TheoreticalTuning(lam, mu, eta, Variant(variant))


def _f_nem(q, p):
    return (q - 1.0) * p ** (2.0 / q)


def k_nem_argmin(p: int) -> float:
    """Minimizer over ``q >= 2`` of ``(q - 1) p^(2/q)``."""
    if int(p) < 2:
        raise ValueError(f"p must be at least 2, got {p}")
    a = 2.0 * math.log(p)
    if a < 4.0:
        return 2.0
    q = 0.5 * (a + math.sqrt(a * a - 4.0 * a))
    if q <= 2.0 or _f_nem(2.0, p) <= _f_nem(q, p):
        return 2.0
    return q


def k_nem(p: int) -> float:
    """``inf_{q >= 2} (q - 1) p^(2/q)``; the interior stationary point solves ``q^2 - aq + a = 0``, ``a = 2 ln p``."""
    return _f_nem(k_nem_argmin(p), p)


def nongaussian_lambda(sigma: float, n: int, p: int, eta: float, L: float) -> float:
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    if int(n) < 1:
        raise ValueError("n must be at least 1")
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if not (math.isfinite(L) and L > 0):
        raise ValueError(f"L must be positive, got {L}")
    return 4.0 * sigma * math.sqrt(k_nem(p) * L / (n * eta))


def lambda_null(X, y) -> float:
    """Smallest lambda whose solution is exactly zero: ``2 max_j |X_j'y| / n``."""
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    return float(2.0 * np.max(np.abs(X.T @ y)) / X.shape[0])


def default_lambda_grid(X, y, points: int = 50, ratio: float = 1e-3) -> np.ndarray:
    """Log grid from the null threshold down to ``ratio`` times it, descending."""
    top = lambda_null(X, y)
    if top == 0.0:
        return np.zeros(1)
    return np.geomspace(top, ratio * top, points)


def default_mu_grid(points: int = 20, low: float = 1e-4, high: float = 10.0) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(low, high, points)])


@dataclass
class CVResult:
    best_lambda: float
    best_mu: float
    lambda_grid: np.ndarray
    mu_grid: np.ndarray
    mean_error: np.ndarray  # (len(lambda_grid), len(mu_grid))
    std_error: np.ndarray
    fold_errors: np.ndarray = field(repr=False)  # (..., folds)
    folds: int = 0

    def surface(self):
        """Rows of (lambda, mu, mean validation error, std)."""
        out = []
        for i, lam in enumerate(self.lambda_grid):
            for j, mu in enumerate(self.mu_grid):
                out.append((float(lam), float(mu), float(self.mean_error[i, j]), float(self.std_error[i, j])))
        return out


def fold_assignment(n: int, folds: int, seed) -> list[np.ndarray]:
    if int(folds) < 2:
        raise ValueError("need at least 2 folds")
    if folds > n:
        raise ValueError(f"{folds} folds but only {n} rows: a fold would be empty")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


CV_SETTINGS = SolverSettings(max_iter=20000, kkt_tol=1e-6)


def path_fits(K, c, yy, penalty_gram, lambda_grid, mu_grid, *, fused=False, settings=CV_SETTINGS):
    """Solutions over the grid for one Gram system, warm-started along lambda.

    Returns an array of shape ``(len(lambda_grid), len(mu_grid), p)``. The
    lambda grid is traversed from its largest value down regardless of the
    order given. With ``fused`` the mu values weight the l1 fusion penalty
    and ``penalty_gram`` is ignored.
    """
    lambda_grid = np.asarray(lambda_grid, dtype=np.float64)
    mu_grid = np.asarray(mu_grid, dtype=np.float64)
    p = K.shape[0]
    out = np.zeros((lambda_grid.size, mu_grid.size, p))
    order = np.argsort(-lambda_grid, kind="stable")
    for j, mu in enumerate(mu_grid):
        if fused:
            Kmu, gamma = K, float(mu)
        else:
            Kmu, gamma = K + mu * penalty_gram, 0.0
        L = 2.0 * lambda_max(Kmu)
        beta = np.zeros(p)
        for i in order:
            beta, _, _, _, L, _ = solve_gram(
                Kmu, c, yy, lambda_grid[i], gamma=gamma, settings=settings, beta0=beta, lipschitz=L
            )
            out[i, j] = beta
    return out


def _best_cell(mean, lambda_grid, mu_grid):
    lowest = np.min(mean)
    cells = [(i, j) for i in range(mean.shape[0]) for j in range(mean.shape[1]) if mean[i, j] == lowest]
    return max(cells, key=lambda ij: (lambda_grid[ij[0]], mu_grid[ij[1]]))


def cross_validate(X, y, S: StructureMatrix | None, lambda_grid=None, mu_grid=None, folds: int = 10,
                   seed=0, *, fused=False, settings=CV_SETTINGS) -> CVResult:
    """K-fold cross-validation of validation prediction error over a (lambda, mu) grid.

    Folds come from a seeded permutation, so results are reproducible. Ties
    go to the larger lambda, then the larger mu. ``S`` may be None for the
    fused comparator (``fused=True``), where mu weights the l1 fusion term.
    """
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    n, p = X.shape
    if y.shape[0] != n:
        raise DimensionError(f"y has length {y.shape[0]}, X has {n} rows")
    if not fused and (S is None or S.p != p):
        raise DimensionError("structure matrix must match the design")
    lambda_grid = default_lambda_grid(X, y) if lambda_grid is None else np.asarray(lambda_grid, dtype=np.float64)
    mu_grid = default_mu_grid() if mu_grid is None else np.asarray(mu_grid, dtype=np.float64)
    if lambda_grid.size == 0 or mu_grid.size == 0:
        raise ValueError("grids must be non-empty")
    if np.any(lambda_grid < 0) or np.any(mu_grid < 0):
        raise ValueError("grid values must be non-negative")
    parts = fold_assignment(n, folds, seed)
    penalty = None if fused else np.asarray(S.Jtilde)
    errs = np.zeros((lambda_grid.size, mu_grid.size, folds))
    for k, val in enumerate(parts):
        train = np.setdiff1d(np.arange(n), val, assume_unique=True)
        Xt, yt = X[train], y[train]
        nt = train.size
        betas = path_fits(Xt.T @ Xt / nt, Xt.T @ yt / nt, float(yt @ yt) / nt, penalty,
                          lambda_grid, mu_grid, fused=fused, settings=settings)
        resid = y[val][None, None, :] - betas @ X[val].T
        errs[:, :, k] = np.mean(resid ** 2, axis=2)
    mean = errs.mean(axis=2)
    std = errs.std(axis=2, ddof=1) if folds > 1 else np.zeros_like(mean)
    i, j = _best_cell(mean, lambda_grid, mu_grid)
    return CVResult(float(lambda_grid[i]), float(mu_grid[j]), lambda_grid, mu_grid, mean, std, errs, folds)
