"""Synthetic regression examples, noise models and replicated method comparisons.

Example labels follow ``[p/n/sigma]`` (``[sigma/rho]`` for example A, whose
shape is fixed at p=8, n=20).
"""

from __future__ import annotations

import csv
import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .io import fmt
from .numkernel import NotPositiveDefiniteError, cholesky
from .solver import FitResult, PenaltyConfig, SolverSettings, fit, fused_lasso_fit
from .structure import StructureKind, build_structure, smoothness
from .tuning import (
    CV_SETTINGS,
    Variant,
    cross_validate,
    default_lambda_grid,
    default_mu_grid,
    path_fits,
    theoretical_lambda,
    theoretical_mu,
)


class Example(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    PSEUDO_REAL_1 = "PseudoReal1"
    PSEUDO_REAL_2 = "PseudoReal2"


class Method(str, enum.Enum):
    LASSO = "Lasso"
    SLASSO = "SLasso"
    ELASTIC_NET = "ElasticNet"
    FUSED = "FusedLasso"


class Tuning(str, enum.Enum):
    TH = "Th"
    CV = "Cv"
    EST = "Est"


class NoiseKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T3 = "student_t3"


_FIXED_SHAPE = {
    Example.A: (8, 20),
    Example.PSEUDO_REAL_1: (1023, 71),
    Example.PSEUDO_REAL_2: (300, 71),
}
_MIN_P = {Example.B: 15, Example.C: 15, Example.D: 40}


@dataclass(frozen=True)
class ExampleSpec:
    example: Example
    p: int | None = None
    n: int | None = None
    sigma: float = 1.0
    rho: float | None = None
    seed: int = 0

    def __post_init__(self):
        ex = Example(self.example)
        object.__setattr__(self, "example", ex)
        if ex in _FIXED_SHAPE:
            fp, fn = _FIXED_SHAPE[ex]
            p = fp if self.p is None else int(self.p)
            n = fn if self.n is None else int(self.n)
            if p != fp or (ex is Example.A and n != fn):
                raise ValueError(f"example {ex.value} has fixed shape p={fp}" + (f", n={fn}" if ex is Example.A else ""))
        else:
            if self.p is None or self.n is None:
                raise ValueError(f"example {ex.value} needs p and n")
            p, n = int(self.p), int(self.n)
            if p < _MIN_P[ex]:
                raise ValueError(f"example {ex.value} needs p >= {_MIN_P[ex]}, got {p}")
        if n < 2:
            raise ValueError(f"n must be at least 2, got {n}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "n", n)
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if ex is Example.A:
            if self.rho is None or not 0 < self.rho < 1:
                raise ValueError("example A needs rho in (0, 1)")
        elif self.rho is not None:
            raise ValueError(f"rho only applies to example A, not {ex.value}")


@dataclass(frozen=True)
class TruthInstance:
    beta_star: np.ndarray
    Astar: np.ndarray
    Psi_true: np.ndarray
    alpha: float
    example: Example = Example.A


def toeplitz_corr(p: int, fn) -> np.ndarray:
    d = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    return fn(d.astype(np.float64))


def group_corr(p: int) -> np.ndarray:
    """Three blocks of five with off-diagonal ``1/1.01``, identity elsewhere."""
    Psi = np.eye(p)
    for g in range(3):
        block = slice(5 * g, 5 * g + 5)
        Psi[block, block] = 1.0 / 1.01
    np.fill_diagonal(Psi, 1.0)
    return Psi


def bump(j, centre: float, width: float, height: float = 10.0):
    t = (np.asarray(j, dtype=np.float64) - centre) / width
    return height * np.exp(-1.0 / (1.0 - t * t))


def piecewise_linear_beta(n: int, length: int | None = None) -> np.ndarray:
    """Ones up to ``n/4``, then ``1 - (4/n)(j - n/4)`` falling linearly towards 0 at ``j = n/2``.

    The default length ``n/2 - 1`` stops at the last nonzero entry. There
    ``|beta|_2^2 = n/3 - 1/2 + 2/(3n)`` and ``|J beta|_2^2 = 4/n - 16/n^2``.
    Padding with zeros adds the final step ``(4/n)^2``.
    """
    if n < 8 or n % 4:
        raise ValueError("n must be a multiple of 4, at least 8")
    length = n // 2 - 1 if length is None else int(length)
    if length < n // 2 - 1:
        raise ValueError(f"length must be at least {n // 2 - 1}")
    j = np.arange(1, length + 1, dtype=np.float64)
    return np.where(j < n / 4, 1.0, np.maximum(1.0 - (4.0 / n) * (j - n / 4), 0.0))


def make_truth(spec: ExampleSpec) -> TruthInstance:
    ex, p = spec.example, spec.p
    beta = np.zeros(p)
    if ex is Example.A:
        beta[[0, 1, 4]] = [3.0, 1.5, 2.0]
        rho = spec.rho
        Psi = toeplitz_corr(p, lambda d: rho ** d)
    elif ex is Example.B:
        beta[:15] = 3.0
        Psi = group_corr(p)
    elif ex is Example.C:
        j = np.arange(1, 16, dtype=np.float64)
        beta[:15] = (3.0 - 0.2 * j) ** 2
        Psi = toeplitz_corr(p, lambda d: np.exp(-d))
    elif ex is Example.D:
        j = np.arange(1, 41, dtype=np.float64)
        beta[:40] = (4.0 + 0.1 * j) ** 2
        Psi = toeplitz_corr(p, lambda d: np.exp(-d))
    elif ex is Example.PSEUDO_REAL_1:
        beta[:250] = bump(np.arange(1, 251), 125.0, 125.1)
        Psi = toeplitz_corr(p, lambda d: 0.5 ** d)
    else:
        beta[:50] = bump(np.arange(1, 51), 25.0, 25.1)
        Psi = toeplitz_corr(p, lambda d: 0.5 ** d)
    beta.setflags(write=False)
    Psi.setflags(write=False)
    return TruthInstance(beta, np.flatnonzero(beta != 0.0), Psi, smoothness(beta), ex)


def _standardize(X):
    scale = np.sqrt(np.mean(X * X, axis=0))
    scale[scale == 0.0] = 1.0
    return X / scale


class DesignSampler:
    """Draws standardized designs with rows ``N(0, Psi)``; the Cholesky factor is computed once."""

    def __init__(self, truth: TruthInstance):
        self.truth = truth
        self.latent_groups = truth.example is Example.B
        if not self.latent_groups:
            try:
                self.chol = cholesky(truth.Psi_true)
            except NotPositiveDefiniteError as exc:
                raise ValueError("Psi not PD") from exc

    def __call__(self, n: int, seed) -> np.ndarray:
        rng = np.random.default_rng(seed)
        p = self.truth.Psi_true.shape[0]
        if self.latent_groups:
            X = rng.standard_normal((n, p))
            Z = rng.standard_normal((n, 3))
            for g in range(3):
                X[:, 5 * g:5 * g + 5] = Z[:, [g]] + 0.1 * X[:, 5 * g:5 * g + 5]
        else:
            X = rng.standard_normal((n, p)) @ self.chol.T
        return _standardize(X)


def sample_design(truth: TruthInstance, n: int, seed) -> np.ndarray:
    """Rows i.i.d. ``N(0, Psi)``, columns scaled to ``||X_j||_n^2 = 1``."""
    return DesignSampler(truth)(n, seed)


def sample_noise(n: int, sigma: float, kind=NoiseKind.GAUSSIAN, seed=None) -> np.ndarray:
    """Gaussian, or Student t(3) rescaled to variance ``sigma^2``."""
    if not sigma >= 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.default_rng(seed)
    if NoiseKind(kind) is NoiseKind.GAUSSIAN:
        return sigma * rng.standard_normal(n)
    return sigma / math.sqrt(3.0) * rng.standard_t(3, size=n)


@dataclass(frozen=True)
class GridSpec:
    lambda_points: int = 50
    lambda_ratio: float = 1e-3
    mu_values: tuple | None = None

    def lambdas(self, X, y):
        return default_lambda_grid(X, y, self.lambda_points, self.lambda_ratio)

    def mus(self):
        return default_mu_grid() if self.mu_values is None else np.asarray(self.mu_values, dtype=np.float64)


@dataclass
class Record:
    replication: int
    method: str
    tuning: str
    lam: float
    mu: float
    pred_err: float
    l2_err: float
    l1_err: float
    sup_err: float
    seminorm_err: float
    j_norm_fit: float
    support_size: int
    sign_match: bool
    seconds: float
    converged: bool


CSV_COLUMNS = ["replication", "method", "tuning", "lambda", "mu", "pred_err", "l2_err", "l1_err", "sup_err",
               "seminorm_err", "j_norm_fit", "support_size", "sign_match", "seconds", "converged"]
METRICS = ["pred_err", "l2_err", "l1_err", "sup_err", "seminorm_err", "j_norm_fit", "support_size"]


@dataclass
class ReplicationReport:
    spec: ExampleSpec
    records: list = field(default_factory=list)

    def select(self, method, tuning) -> list:
        m, t = Method(method).value, Tuning(tuning).value
        return [r for r in self.records if r.method == m and r.tuning == t]

    def metric(self, method, tuning, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.select(method, tuning)], dtype=np.float64)

    def rows(self):
        for r in self.records:
            yield [
                str(r.replication), r.method, r.tuning, fmt(r.lam), fmt(r.mu), fmt(r.pred_err), fmt(r.l2_err),
                fmt(r.l1_err), fmt(r.sup_err), fmt(r.seminorm_err), fmt(r.j_norm_fit), str(r.support_size),
                str(int(r.sign_match)), fmt(r.seconds), str(int(r.converged)),
            ]

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            w.writerows(self.rows())

    def summary(self) -> dict:
        """Median and quartiles of every metric per (method, tuning)."""
        out = {}
        keys = []
        for r in self.records:
            if (r.method, r.tuning) not in keys:
                keys.append((r.method, r.tuning))
        for m, t in keys:
            block = {"replications": len(self.select(m, t)),
                     "converged": int(sum(r.converged for r in self.select(m, t)))}
            for name in METRICS:
                v = self.metric(m, t, name)
                q1, med, q3 = np.percentile(v, [25, 50, 75])
                block[name] = {"median": float(med), "q1": float(q1), "q3": float(q3)}
            out[f"{m}/{t}"] = block
        return out


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def theoretical_pair(method: Method, truth: TruthInstance, sigma: float, n: int):
    """(lambda, mu) from the experimental rule; the fused comparator reuses the S-Lasso pair."""
    beta = truth.beta_star
    p = beta.shape[0]
    lam = theoretical_lambda(sigma, n, p, variant=Variant.EXPERIMENTAL)
    if method is Method.LASSO:
        return lam, 0.0
    kind = StructureKind.ELASTIC_NET if method is Method.ELASTIC_NET else StructureKind.SMOOTH_LASSO
    Jt = build_structure(kind, p).Jtilde
    norm = float(np.linalg.norm(Jt @ beta))
    return lam, theoretical_mu(lam, truth.Astar.size, norm, Variant.EXPERIMENTAL)


def _structure_for(method: Method, p: int):
    if method is Method.SLASSO:
        return build_structure(StructureKind.SMOOTH_LASSO, p)
    if method is Method.ELASTIC_NET:
        return build_structure(StructureKind.ELASTIC_NET, p)
    return build_structure(StructureKind.LASSO, p)


def fit_method(method: Method, X, y, lam, mu, settings=SolverSettings()) -> FitResult:
    if method is Method.FUSED:
        return fused_lasso_fit(X, y, lam, mu, settings)
    S = _structure_for(method, X.shape[1])
    return fit(X, y, PenaltyConfig(lam, mu if method is not Method.LASSO else 0.0, S.kind), S, settings)


def _est_choice(method, X, y, beta_star, lambda_grid, mu_grid):
    n = X.shape[0]
    S = _structure_for(method, X.shape[1])
    betas = path_fits(X.T @ X / n, X.T @ y / n, float(y @ y) / n, np.asarray(S.Jtilde),
                      lambda_grid, mu_grid, fused=method is Method.FUSED, settings=CV_SETTINGS)
    err = np.linalg.norm(betas - beta_star, axis=2)
    lowest = err.min()
    cells = [(i, j) for i in range(err.shape[0]) for j in range(err.shape[1]) if err[i, j] == lowest]
    i, j = max(cells, key=lambda ij: (lambda_grid[ij[0]], mu_grid[ij[1]]))
    return float(lambda_grid[i]), float(mu_grid[j])


def _one_replication(r, seq, spec, truth, sampler, methods, tunings, grid, folds, timing, settings, noise):
    s_design, s_noise, s_test, s_test_noise, s_cv = seq.spawn(5)
    n = spec.n
    beta = truth.beta_star
    X = sampler(n, s_design)
    y = X @ beta + sample_noise(n, spec.sigma, noise, s_noise)
    Xt = sampler(n, s_test)
    yt = Xt @ beta + sample_noise(n, spec.sigma, noise, s_test_noise)
    Jsl = build_structure(StructureKind.SMOOTH_LASSO, beta.shape[0])
    cv_seed = int(s_cv.generate_state(1)[0])
    lambda_grid = grid.lambdas(X, y)
    out = []
    for method in methods:
        mu_grid = np.zeros(1) if method is Method.LASSO else grid.mus()
        for tuning in tunings:
            t0 = time.perf_counter()
            if tuning is Tuning.TH:
                lam, mu = theoretical_pair(method, truth, spec.sigma, n)
            elif tuning is Tuning.CV:
                S = None if method is Method.FUSED else _structure_for(method, X.shape[1])
                res = cross_validate(X, y, S, lambda_grid, mu_grid, folds, cv_seed, fused=method is Method.FUSED)
                lam, mu = res.best_lambda, res.best_mu
            else:
                lam, mu = _est_choice(method, X, y, beta, lambda_grid, mu_grid)
            res = fit_method(method, X, y, lam, mu, settings)
            elapsed = time.perf_counter() - t0 if timing else 0.0
            b = res.beta
            d = beta - b
            resid = yt - Xt @ b
            out.append(Record(
                replication=r, method=method.value, tuning=tuning.value, lam=lam, mu=mu,
                pred_err=float(resid @ resid / n), l2_err=float(np.linalg.norm(d)),
                l1_err=float(np.abs(d).sum()), sup_err=float(np.max(np.abs(d))),
                seminorm_err=float(d @ Jsl.Jtilde @ d), j_norm_fit=float(np.linalg.norm(Jsl.J @ b)),
                support_size=int(res.active_set.size), sign_match=bool(np.all(np.sign(b) == np.sign(beta))),
                seconds=elapsed, converged=res.converged,
            ))
    return out


def run_replications(spec: ExampleSpec, methods, tunings, replications: int, seed=None, *, grid=GridSpec(),
                     folds: int = 10, timing: bool = False, threads: int = 1, settings=SolverSettings(),
                     noise=NoiseKind.GAUSSIAN) -> ReplicationReport:
    """Fresh training data, test data (same size) and fits per replication.

    Replication ``r`` draws everything from the ``r``-th child of the master
    seed, so methods see identical data within a replication. Records are
    assembled in (replication, method, tuning) order whatever ``threads`` is.
    The ``seconds`` column is 0 unless ``timing`` is set, which keeps output
    byte-reproducible by default.
    """
    if int(replications) < 1:
        raise ValueError("replications must be at least 1")
    methods = [Method(m) for m in methods]
    tunings = [Tuning(t) for t in tunings]
    if not methods or not tunings:
        raise ValueError("need at least one method and one tuning")
    seed = spec.seed if seed is None else seed
    truth = make_truth(spec)
    sampler = DesignSampler(truth)
    seqs = np.random.SeedSequence(seed).spawn(int(replications))
    noise = NoiseKind(noise)

    def job(r):
        return _one_replication(r, seqs[r], spec, truth, sampler, methods, tunings, grid, folds, timing,
                                settings, noise)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            chunks = list(pool.map(job, range(int(replications))))
    else:
        chunks = [job(r) for r in range(int(replications))]
    return ReplicationReport(spec, [rec for chunk in chunks for rec in chunk])


def record_dict(rec: Record) -> dict:
    d = asdict(rec)
    d["lambda"] = d.pop("lam")
    return d


__all__ = [
    "Example", "ExampleSpec", "GridSpec", "Method", "NoiseKind", "Record", "ReplicationReport", "TruthInstance",
    "Tuning", "DesignSampler", "make_truth", "run_replications", "sample_design", "sample_noise",
    "theoretical_pair", "fit_method", "piecewise_linear_beta",
]
