"""Penalized least squares solvers.

The quadratic-penalized criterion is

    ||y - X b||_n^2 + lam * |b|_1 + mu * b' Jtilde b,     ||v||_n^2 = |v|_2^2 / n,

solved as a plain Lasso on augmented data by accelerated proximal gradient
(FISTA with backtracking and restart on objective increase).

Because the loss carries ``1/n`` and no ``1/2``, the subgradient optimality
conditions are ``g_j = -lam * sign(b_j)`` on the support and ``|g_j| <= lam``
off it, where ``g = (2/n) X'(X b - y)``. Equivalently ``|X_j'(y - X b)|/n <=
lam/2``. Other Lasso packages differ by factors of 2 and n.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .numkernel import DimensionError, as_matrix, as_vector, lambda_max
from .structure import StructureKind, StructureMatrix, augment

ORACLE_MAX_P = 12


class DegenerateProblemError(RuntimeError):
    """No sign pattern satisfied the optimality conditions numerically."""


@dataclass(frozen=True)
class PenaltyConfig:
    lam: float
    mu: float = 0.0
    structure: StructureKind = StructureKind.LASSO

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise ValueError(f"lambda must be a finite non-negative number, got {self.lam}")
        if not (math.isfinite(self.mu) and self.mu >= 0.0):
            raise ValueError(f"mu must be a finite non-negative number, got {self.mu}")
        object.__setattr__(self, "structure", StructureKind(self.structure))


@dataclass(frozen=True)
class SolverSettings:
    max_iter: int = 50000
    kkt_tol: float = 1e-8
    restart: bool = True

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.kkt_tol > 0.0:
            raise ValueError("kkt_tol must be positive")


@dataclass
class FitResult:
    beta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    active_set: np.ndarray
    trace: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    lipschitz: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "beta": [float(b) for b in self.beta],
            "objective": float(self.objective),
            "kkt_residual": float(self.kkt_residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "active_set": [int(j) for j in self.active_set],
        }


def soft_threshold(z, t: float):
    """``sign(z) * max(|z| - t, 0)``; scalars in, scalars out."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    if np.ndim(z) == 0:
        z = float(z)
        return math.copysign(max(abs(z) - t, 0.0), z) if abs(z) > t else 0.0
    return kernels.soft_threshold(np.ascontiguousarray(z, dtype=np.float64), float(t))


def _check_problem(X, y):
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    if y.shape[0] != X.shape[0]:
        raise DimensionError(f"y has length {y.shape[0]}, X has {X.shape[0]} rows")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"need n >= 1 and p >= 1, got {X.shape}")
    return X, y


def objective(beta, X, y, cfg: PenaltyConfig, S: StructureMatrix) -> float:
    X, y = _check_problem(X, y)
    beta = as_vector(beta, "beta")
    if beta.shape[0] != X.shape[1] or S.p != X.shape[1]:
        raise DimensionError(
            f"beta length {beta.shape[0]}, X columns {X.shape[1]}, structure p {S.p} must agree"
        )
    r = y - X @ beta
    return float(r @ r / X.shape[0] + cfg.lam * np.abs(beta).sum() + cfg.mu * (beta @ S.Jtilde @ beta))


def fused_objective(beta, X, y, lam: float, mu_fuse: float) -> float:
    X, y = _check_problem(X, y)
    beta = as_vector(beta, "beta")
    r = y - X @ beta
    return float(r @ r / X.shape[0] + lam * np.abs(beta).sum() + mu_fuse * np.abs(np.diff(beta)).sum())


def kkt_violation(beta, grad, lam: float) -> float:
    """Largest violation of the subgradient conditions given the smooth gradient."""
    beta = np.asarray(beta)
    g = np.asarray(grad)
    r = np.where(
        beta > 0.0,
        np.abs(g + lam),
        np.where(beta < 0.0, np.abs(g - lam), np.maximum(np.abs(g) - lam, 0.0)),
    )
    return float(r.max()) if r.size else 0.0


def kkt_residual(beta, X, y, cfg: PenaltyConfig, S: StructureMatrix) -> float:
    """KKT residual recomputed from the augmented data, independent of the solver."""
    aug = augment(X, y, S, cfg.mu)
    beta = as_vector(beta, "beta")
    g = (2.0 / aug.n_original) * (aug.Xaug.T @ (aug.Xaug @ beta - aug.yaug))
    return kkt_violation(beta, g, cfg.lam)


def solve_gram(K, c, yy, lam, *, gamma=0.0, settings=SolverSettings(), beta0=None, lipschitz=None):
    """Run the accelerated prox-gradient kernel on ``b'Kb - 2c'b + yy`` plus penalties.

    Returns the raw kernel tuple ``(beta, iterations, converged, residual,
    lipschitz, trace)``. ``lipschitz`` may be any starting estimate; the
    kernel backtracks upward when it is too small.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    p = K.shape[0]
    if beta0 is None:
        beta0 = np.zeros(p)
    beta = np.ascontiguousarray(beta0, dtype=np.float64)
    if lipschitz is None:
        lipschitz = 2.0 * lambda_max(K)
    L = max(float(lipschitz), 1e-12)
    lam, gamma, tol = float(lam), float(gamma), float(settings.kkt_tol)
    # Iterate in growing chunks; between chunks try to finish exactly on the
    # support (and fusion blocks) found by the prox steps.
    budget = int(settings.max_iter)
    chunk = min(POLISH_FIRST_CHUNK, budget)
    used = 0
    traces = []
    while True:
        beta, it, conv, resid, L, trace = kernels.fista_gram(
            K, c, float(yy), lam, gamma, beta, L, chunk, tol, bool(settings.restart))
        traces.append(trace if not traces else trace[1:])
        used += it
        if conv or used >= budget:
            break
        polished = _polish(K, c, lam, gamma, beta)
        if polished is not None:
            r = _residual(K, c, lam, gamma, polished, L)
            if r <= tol:
                beta, resid, conv = polished, r, True
                traces.append(np.array([_gram_objective(K, c, yy, lam, gamma, beta)]))
                break
        chunk = min(2 * chunk, budget - used)
    return beta, used, bool(conv), float(resid), L, np.concatenate(traces)


POLISH_FIRST_CHUNK = 200


def _gram_objective(K, c, yy, lam, gamma, b):
    return float(b @ K @ b - 2.0 * (c @ b) + yy + lam * np.abs(b).sum() + gamma * np.abs(np.diff(b)).sum())


def _residual(K, c, lam, gamma, b, L):
    g = 2.0 * (K @ b - c)
    if gamma <= 0.0:
        return kkt_violation(b, g, lam)
    v = kernels.tv_prox(np.ascontiguousarray(b - g / L), gamma / L)
    nxt = kernels.soft_threshold(v, lam / L)
    return float(np.max(np.abs(b - nxt))) * L


def _polish(K, c, lam, gamma, beta):
    """Solve the stationarity system with the zero pattern, signs and (for the
    fused penalty) fusion blocks of ``beta`` held fixed. None if singular or
    if the solution leaves that pattern."""
    p = beta.shape[0]
    if gamma <= 0.0:
        S = np.flatnonzero(beta)
        if S.size == 0:
            return None
        s = np.sign(beta[S])
        A = K[np.ix_(S, S)]
        try:
            if np.linalg.cond(A) > 1e12:
                return None
            b = np.linalg.solve(A, c[S] - 0.5 * lam * s)
        except np.linalg.LinAlgError:
            return None
        if np.any(b * s <= 0.0):
            return None
        out = np.zeros(p)
        out[S] = b
        return out
    starts = np.flatnonzero(np.r_[True, beta[1:] != beta[:-1]])
    bounds = np.r_[starts, p]
    values = beta[starts]
    nb = starts.size
    step = np.sign(np.diff(values))  # fixed signs of jumps between blocks
    tvgrad = np.zeros(nb)
    tvgrad[1:] += step
    tvgrad[:-1] -= step
    free = np.flatnonzero(values != 0.0)
    if free.size == 0:
        return None
    G = np.zeros((p, free.size))
    for k, bidx in enumerate(free):
        G[bounds[bidx]:bounds[bidx + 1], k] = 1.0
    sizes = G.sum(axis=0)
    z = np.sign(values[free])
    A = G.T @ K @ G
    rhs = G.T @ c - 0.5 * lam * z * sizes - 0.5 * gamma * tvgrad[free]
    try:
        if np.linalg.cond(A) > 1e12:
            return None
        theta = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    if np.any(theta * z <= 0.0):
        return None
    newvals = values.copy()
    newvals[free] = theta
    if np.any(np.sign(np.diff(newvals)) != step):
        return None
    return np.repeat(newvals, np.diff(bounds))


def _active(beta):
    return np.flatnonzero(beta != 0.0)


def fit(X, y, cfg: PenaltyConfig, S: StructureMatrix, settings: SolverSettings = SolverSettings(),
        beta0=None, lipschitz=None) -> FitResult:
    """Minimize the quadratic-penalized criterion.

    The problem is augmented (``X`` stacked over ``sqrt(n mu) J``) and solved
    as a Lasso in Gram form. Exact zeros come only from the prox step.
    ``beta0`` warm-starts the iteration. If ``max_iter`` runs out the last
    (best, since the trace is monotone) iterate is returned with
    ``converged=False``.
    """
    X, y = _check_problem(X, y)
    if S.p != X.shape[1]:
        raise DimensionError(f"X has {X.shape[1]} columns, structure expects {S.p}")
    aug = augment(X, y, S, cfg.mu)
    n = aug.n_original
    K = aug.Xaug.T @ aug.Xaug / n
    c = aug.Xaug.T @ aug.yaug / n
    yy = float(aug.yaug @ aug.yaug) / n
    tol = settings.kkt_tol
    beta, iters, _, _, L, trace = solve_gram(
        K, c, yy, cfg.lam, settings=settings, beta0=beta0, lipschitz=lipschitz
    )
    resid = kkt_residual(beta, X, y, cfg, S)
    # the Gram-form residual and the from-scratch one can differ by rounding
    retry_tol = tol
    for _ in range(4):
        if resid <= tol or iters >= settings.max_iter:
            break
        retry_tol *= 0.25
        tighter = SolverSettings(settings.max_iter - iters, retry_tol, settings.restart)
        beta, more, _, _, L, more_trace = solve_gram(
            K, c, yy, cfg.lam, settings=tighter, beta0=beta, lipschitz=L
        )
        trace = np.concatenate([trace, more_trace[1:]])
        iters += more
        resid = kkt_residual(beta, X, y, cfg, S)
    return FitResult(
        beta=beta,
        objective=objective(beta, X, y, cfg, S),
        iterations=int(iters),
        converged=bool(resid <= tol),
        kkt_residual=resid,
        active_set=_active(beta),
        trace=trace,
        lipschitz=float(L),
    )


def tv_prox(v, gamma: float) -> np.ndarray:
    """Exact minimizer of ``0.5 |u - v|^2 + gamma * sum |u_j - u_{j-1}|``."""
    v = as_vector(v, "v")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    return kernels.tv_prox(v, float(gamma))


def fused_lasso_fit(X, y, lam: float, mu_fuse: float, settings: SolverSettings = SolverSettings(),
                    beta0=None, lipschitz=None) -> FitResult:
    """Fused-Lasso comparator: ``||y - Xb||_n^2 + lam |b|_1 + mu_fuse * sum |b_j - b_{j-1}|``.

    Prox step is ``soft_threshold(tv_prox(v, t mu_fuse), t lam)``, exact for
    this pair of penalties. ``kkt_residual`` holds the sup-norm of the
    gradient mapping.
    """
    X, y = _check_problem(X, y)
    if lam < 0 or mu_fuse < 0:
        raise ValueError("penalty weights must be non-negative")
    n = X.shape[0]
    K = X.T @ X / n
    c = X.T @ y / n
    yy = float(y @ y) / n
    if mu_fuse == 0.0:
        beta, iters, conv, resid, L, trace = solve_gram(
            K, c, yy, lam, settings=settings, beta0=beta0, lipschitz=lipschitz)
    else:
        beta, iters, conv, resid, L, trace = solve_gram(
            K, c, yy, lam, gamma=mu_fuse, settings=settings, beta0=beta0, lipschitz=lipschitz)
    return FitResult(
        beta=beta,
        objective=fused_objective(beta, X, y, lam, mu_fuse),
        iterations=int(iters),
        converged=bool(conv),
        kkt_residual=float(resid),
        active_set=_active(beta),
        trace=trace,
        lipschitz=float(L),
    )


@dataclass(frozen=True)
class OracleSolution:
    beta: np.ndarray
    unique: bool
    verified_patterns: int


def kkt_oracle(X, y, cfg: PenaltyConfig, S: StructureMatrix, tol: float = 1e-9) -> OracleSolution:
    """Exhaustive sign-pattern solver for small ``p`` (at most 12).

    For each support and each sign vector on it, solve the stationarity system
    ``K_SS b_S = c_S - (lam/2) s_S`` with ``K = X'X/n + mu Jtilde``, then keep
    the solutions whose signs agree with ``s`` and whose off-support gradient
    satisfies ``|g_j| <= lam``. Among verified solutions the smallest l1 norm
    wins; ``unique`` is False when verified solutions disagree.
    """
    X, y = _check_problem(X, y)
    n, p = X.shape
    if p > ORACLE_MAX_P:
        raise ValueError(f"oracle enumerates 3^p patterns; p={p} exceeds {ORACLE_MAX_P}")
    lam = cfg.lam
    K = X.T @ X / n + cfg.mu * np.asarray(S.Jtilde)
    c = X.T @ y / n
    scale = max(1.0, lam, float(np.max(np.abs(c))))
    slack = tol * scale
    found = []
    for size in range(p + 1):
        for support in itertools.combinations(range(p), size):
            idx = np.array(support, dtype=int)
            beta = np.zeros(p)
            if size == 0:
                if np.all(np.abs(2.0 * c) <= lam + slack):
                    found.append(beta)
                continue
            Kss = K[np.ix_(idx, idx)]
            if np.linalg.cond(Kss) > 1e12:
                continue
            signs = np.array(list(itertools.product((-1.0, 1.0), repeat=size))).T
            rhs = c[idx, None] - 0.5 * lam * signs
            sols = np.linalg.solve(Kss, rhs)
            ok = np.all(sols * signs > -slack, axis=0)
            for col in np.flatnonzero(ok):
                beta = np.zeros(p)
                beta[idx] = sols[:, col]
                g = 2.0 * (K @ beta - c)
                off = np.ones(p, dtype=bool)
                off[idx] = False
                if np.all(np.abs(g[off]) <= lam + slack):
                    found.append(beta)
    if not found:
        raise DegenerateProblemError("degenerate: no sign pattern satisfies the KKT conditions")
    best = min(found, key=lambda b: float(np.abs(b).sum()))
    spread = max(float(np.max(np.abs(b - best))) for b in found)
    return OracleSolution(best, spread <= 1e-7 * max(1.0, float(np.max(np.abs(best)))), len(found))


def kkt_oracle_fit(X, y, cfg: PenaltyConfig, S: StructureMatrix) -> np.ndarray:
    return kkt_oracle(X, y, cfg, S).beta
