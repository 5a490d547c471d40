"""Numerical checks of the design assumptions, evaluated error bounds, and
hard-thresholded variable selection.

Restricted-eigenvalue constants are infima over cones and cannot be computed
exactly in general. Two numbers are reported: a sampled upper estimate and
the certified lower bound ``max(lambda_min(K), 0)``. Bound evaluations take
whichever ``phi`` the caller passes; the CLI passes the certified one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .numkernel import DimensionError, as_matrix, as_vector, check_symmetric, sym_eigvals
from .simulate import NoiseKind, sample_noise
from .solver import FitResult
from .structure import StructureMatrix, interaction_set
from .tuning import k_nem

DEFAULT_CONE_SAMPLES = 500


class AssumptionFailure(ValueError):
    """The restricted eigenvalue constant is not positive, so no bound applies."""


@dataclass(frozen=True)
class GramPair:
    Psi: np.ndarray
    Kn: np.ndarray
    mu: float = 0.0


def build_gram(X, S: StructureMatrix, mu: float) -> GramPair:
    X = as_matrix(X, "X")
    if X.shape[1] != S.p:
        raise DimensionError(f"X has {X.shape[1]} columns, structure expects {S.p}")
    if not mu >= 0:
        raise ValueError("mu must be non-negative")
    Psi = X.T @ X / X.shape[0]
    Psi = 0.5 * (Psi + Psi.T)
    return GramPair(Psi, Psi + mu * np.asarray(S.Jtilde), float(mu))


def gram_from_matrix(K) -> GramPair:
    """Wrap a given expanded Gram matrix (population or synthetic) with ``mu = 0``."""
    K = as_matrix(K, "K")
    check_symmetric(K)
    return GramPair(K, K, 0.0)


class ConeKind(str, enum.Enum):
    QUADRATIC = "quadratic"  # |D_out|_1 <= rho |D_in|_2
    LINEAR = "linear"  # |D_out|_1 <= 4 |D_in|_1


@dataclass(frozen=True)
class ConeSpec:
    Theta: np.ndarray
    rho_n: float = 0.0
    cone_kind: ConeKind = ConeKind.QUADRATIC
    ratio_set: np.ndarray | None = None

    def __post_init__(self):
        theta = np.unique(np.asarray(self.Theta, dtype=int))
        if theta.size == 0:
            raise ValueError("Theta must be non-empty")
        object.__setattr__(self, "Theta", theta)
        object.__setattr__(self, "cone_kind", ConeKind(self.cone_kind))
        if not self.rho_n >= 0:
            raise ValueError("cone radius must be non-negative")
        ratio = theta if self.ratio_set is None else np.unique(np.asarray(self.ratio_set, dtype=int))
        if not np.all(np.isin(theta, ratio)):
            raise ValueError("ratio set must contain Theta")
        object.__setattr__(self, "ratio_set", ratio)


def cone_radius(lam: float, mu: float, sparsity: int, jnorm2: float) -> float:
    """``4 sqrt(s) + (4 mu / lam) |Jtilde beta*|_2``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return 4.0 * math.sqrt(sparsity) + 4.0 * mu / lam * jnorm2


def _cone_budget(cone: ConeSpec, d_in):
    if cone.cone_kind is ConeKind.QUADRATIC:
        return cone.rho_n * float(np.linalg.norm(d_in))
    return 4.0 * float(np.abs(d_in).sum())


def _to_cone(cone, delta, inside, outside):
    """Scale the outside part down onto the cone if it exceeds the budget."""
    budget = _cone_budget(cone, delta[inside])
    used = float(np.abs(delta[outside]).sum())
    if used > budget:
        delta[outside] *= budget / used if used > 0 else 0.0
    return delta


def _rayleigh(K, delta, ratio):
    den = float(delta[ratio] @ delta[ratio])
    if den <= 0.0:
        return math.inf
    return float(delta @ K @ delta) / den


@dataclass(frozen=True)
class PhiEstimate:
    phi_estimate: float
    phi_lower_bound: float


def phi_lower_bound(K) -> float:
    return max(float(sym_eigvals(K)[0]), 0.0)


def estimate_phi(G: GramPair, cone: ConeSpec, samples: int = DEFAULT_CONE_SAMPLES, seed=0,
                 refine_steps: int = 30) -> PhiEstimate:
    """Upper estimate of the cone-restricted eigenvalue plus the eigenvalue lower bound.

    Candidates: the exact minimum over directions supported on Theta, then
    random directions (Gaussian on Theta, sparse Laplace tails outside pushed
    to the cone boundary), each refined by projected gradient steps on the
    Rayleigh quotient. Every candidate is feasible, so the minimum found can
    only overestimate the infimum.
    """
    if int(samples) < 1:
        raise ValueError("samples must be at least 1")
    K = np.asarray(G.Kn)
    p = K.shape[0]
    theta = cone.Theta
    if theta.max() >= p:
        raise DimensionError(f"Theta index {theta.max()} out of range for p={p}")
    inside = np.zeros(p, dtype=bool)
    inside[theta] = True
    outside = ~inside
    ratio = cone.ratio_set
    best = float(sym_eigvals(K[np.ix_(theta, theta)])[0])
    rng = np.random.default_rng(seed)
    n_out = int(outside.sum())
    for _ in range(int(samples)):
        delta = np.zeros(p)
        delta[theta] = rng.standard_normal(theta.size)
        if n_out:
            k = int(rng.integers(1, n_out + 1))
            idx = rng.choice(np.flatnonzero(outside), size=k, replace=False)
            delta[idx] = rng.laplace(size=k)
            used = float(np.abs(delta[outside]).sum())
            budget = _cone_budget(cone, delta[inside])
            delta[outside] *= budget / used if used > 0 else 0.0
        r = _rayleigh(K, delta, ratio)
        step = 0.5 / max(float(np.max(np.abs(K))) * p, 1e-12)
        for _ in range(int(refine_steps)):
            den = float(delta[ratio] @ delta[ratio])
            grad = 2.0 * (K @ delta) / den
            grad[ratio] -= 2.0 * r * delta[ratio] / den
            trial = _to_cone(cone, delta - step * den * grad, inside, outside)
            rt = _rayleigh(K, trial, ratio)
            if rt < r:
                delta, r = trial, rt
                step *= 1.5
            else:
                step *= 0.5
        best = min(best, r)
    lower = phi_lower_bound(K)
    return PhiEstimate(max(best, lower), lower)


@dataclass(frozen=True)
class CoherenceResult:
    t: float
    passes: bool
    phi: float
    mutual_coherence: float


def coherence_check(G: GramPair, Astar) -> CoherenceResult:
    """Cross-block coherence ``t = |A*| max_{j in A*, k not in A*} |K_jk|`` against ``phi / 64``."""
    K = np.asarray(G.Kn)
    p = K.shape[0]
    A = np.unique(np.asarray(Astar, dtype=int))
    if A.size == 0 or A.size >= p:
        raise ValueError("A* must be a non-empty proper subset of the indices")
    rest = np.setdiff1d(np.arange(p), A)
    t = A.size * float(np.max(np.abs(K[np.ix_(A, rest)])))
    phi = phi_lower_bound(K)
    off = np.asarray(G.Psi) - np.diag(np.diag(G.Psi))
    return CoherenceResult(t, bool(t <= phi / 64.0), phi, float(np.max(np.abs(off))))


def assumption_E_L(X) -> float:
    """``n^-1 sum_i max_j x_ij^2``."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return 0.0
    return float(np.mean(np.max(X * X, axis=1)))


class BoundVariant(str, enum.Enum):
    THEOREM1 = "theorem1"
    COROLLARY1 = "corollary1"
    THEOREM3 = "theorem3"


@dataclass
class BoundRecord:
    variant: str
    prediction: float
    seminorm: float
    l1: float
    l2: float
    sup: float
    rho_n: float
    c_tilde: float
    threshold: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {k: (v if not isinstance(v, float) or math.isfinite(v) else None) for k, v in asdict(self).items()}


def evaluate_bounds(beta_star, S: StructureMatrix, lambda_n: float, mu_n: float, phi: float,
                    variant=BoundVariant.THEOREM1, *, sigma=None, eta=None, n=None, m=None) -> BoundRecord:
    """Right-hand sides of the error bounds for a known truth.

    ``l2``/``sup`` and ``threshold`` use ``c = 2/phi (1 + rho_n / sqrt(m))``
    with ``m`` defaulting to the size of the interaction set. The corollary
    variant uses its closed form ``288 sigma^2 / phi * log(p/eta)/n * s``
    for the prediction bound when ``sigma``, ``eta`` and ``n`` are given.
    """
    variant = BoundVariant(variant)
    beta_star = as_vector(beta_star, "beta_star")
    if beta_star.shape[0] != S.p:
        raise DimensionError("beta_star length does not match the structure")
    if not phi > 0:
        raise AssumptionFailure(f"phi = {phi} is not positive: the bounds do not apply")
    if lambda_n < 0 or mu_n < 0:
        raise ValueError("tuning parameters must be non-negative")
    s = int(np.count_nonzero(beta_star))
    v = np.asarray(S.Jtilde) @ beta_star
    j2 = float(np.linalg.norm(v))
    jinf = float(np.max(np.abs(v)))
    if lambda_n == 0.0 and mu_n == 0.0:
        return BoundRecord(variant.value, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, degenerate=True)
    if variant is BoundVariant.THEOREM3:
        pred = 4.0 * lambda_n ** 2 * s / phi
        semi = 4.0 * jinf * lambda_n * s / phi
        l1 = 8.0 * lambda_n * s / phi
    else:
        core = (2.0 * lambda_n * math.sqrt(s) + 2.0 * mu_n * j2) ** 2 / phi
        pred = core
        if variant is BoundVariant.COROLLARY1 and None not in (sigma, eta, n):
            pred = 288.0 * sigma ** 2 / phi * math.log(S.p / eta) / n * s
        semi = core / mu_n if mu_n > 0 else math.inf
        l1 = 2.0 * core / lambda_n if lambda_n > 0 else math.inf
    if lambda_n > 0:
        rho = cone_radius(lambda_n, mu_n, s, j2)
        if m is None:
            m = max(int(interaction_set(beta_star, S).size), 1)
        c = 2.0 / phi * (1.0 + rho / math.sqrt(m))
        thr = c * (lambda_n * math.sqrt(s) + mu_n * j2)
    else:
        rho, c, thr = math.inf, math.inf, math.inf
    return BoundRecord(variant.value, pred, semi, l1, thr, thr, rho, c, thr)


def set_C(beta_star, beta_hat, B, m: int | None = None) -> np.ndarray:
    """Indices of the ``m`` largest ``|beta* - beta_hat|`` outside ``B`` (``m`` defaults to ``|B|``)."""
    beta_star = as_vector(beta_star, "beta_star")
    d = np.abs(beta_star - as_vector(beta_hat, "beta_hat"))
    B = np.asarray(B, dtype=int)
    p = d.shape[0]
    m = B.size if m is None else int(m)
    if m + B.size >= p:
        raise ValueError(f"need m + |B| < p, got m={m}, |B|={B.size}, p={p}")
    rest = np.setdiff1d(np.arange(p), B)
    order = np.argsort(-d[rest], kind="stable")
    return np.sort(rest[order[:m]])


def threshold_level(c_tilde: float, lambda_n: float, mu_n: float, sparsity: int, structure_norm: float) -> float:
    return c_tilde * (lambda_n * math.sqrt(sparsity) + mu_n * structure_norm)


def threshold_select(fit, c_tilde: float, lambda_n: float, mu_n: float, sparsity: int, structure_norm: float):
    """Zero every coefficient with ``|b_j|`` below ``c_tilde (lambda sqrt(s) + mu |Jtilde beta*|_2)``.

    ``fit`` is a FitResult or a coefficient vector. Returns the thresholded
    vector and the indices kept.
    """
    beta = fit.beta if isinstance(fit, FitResult) else as_vector(fit, "beta")
    if min(c_tilde, lambda_n, mu_n, structure_norm) < 0 or sparsity < 0:
        raise ValueError("threshold inputs must be non-negative")
    thr = threshold_level(c_tilde, lambda_n, mu_n, sparsity, structure_norm)
    keep = np.abs(beta) >= thr
    out = np.where(keep, beta, 0.0)
    return out, np.flatnonzero(out != 0.0)


@dataclass(frozen=True)
class SignRecord:
    match: bool
    mismatches: np.ndarray
    match_on_support: bool
    selected_within_support: bool


def sign_consistency(beta_hat, beta_star) -> SignRecord:
    """Exact sign agreement (``sign(0) = 0``), agreement on A*, and whether the selected set lies in A*."""
    bh = np.asarray(beta_hat, dtype=np.float64)
    bs = np.asarray(beta_star, dtype=np.float64)
    if bh.shape != bs.shape:
        raise DimensionError(f"lengths differ: {bh.shape[0]} vs {bs.shape[0]}")
    sh, ss = np.sign(bh), np.sign(bs)
    bad = np.flatnonzero(sh != ss)
    support = ss != 0
    return SignRecord(
        bool(bad.size == 0),
        bad,
        bool(np.all(sh[support] == ss[support])),
        bool(np.all(support[sh != 0])),
    )


def lemma3_lambda(sigma: float, n: int, p: int, eta: float, tau: float) -> float:
    """``(2 sqrt 2 / tau) sigma sqrt(log(p/eta)/n)``: Gaussian noise level for the event."""
    return 2.0 * math.sqrt(2.0) / tau * sigma * math.sqrt(math.log(p / eta) / n)


def lemma4_lambda(sigma: float, n: int, p: int, eta: float, tau: float, L: float) -> float:
    """``(2 sigma / tau) sqrt(K_Nem L / (n eta))``: finite-variance noise level for the event."""
    return 2.0 * sigma / tau * math.sqrt(k_nem(p) * L / (n * eta))


def concentration_event_rate(X, sigma: float, lambda_n: float, tau: float, noise_kind=NoiseKind.GAUSSIAN,
                             replications: int = 2000, seed=0) -> float:
    """Monte-Carlo frequency of ``max_j 2 |X_j' eps / n| <= tau lambda_n`` over fresh noise."""
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    if int(replications) < 1:
        raise ValueError("replications must be at least 1")
    X = as_matrix(X, "X")
    n = X.shape[0]
    level = tau * lambda_n
    hits = 0
    for child in np.random.SeedSequence(seed).spawn(int(replications)):
        eps = sample_noise(n, sigma, noise_kind, child)
        if 2.0 * float(np.max(np.abs(X.T @ eps))) / n <= level:
            hits += 1
    return hits / int(replications)


@dataclass
class DiagnosticsReport:
    phi_estimate: float
    phi_lower_bound: float
    coherence_t: float | None
    coherence_passes: bool | None
    mutual_coherence: float
    L: float
    K_nem: float | None
    alpha: float | None
    spectrum: tuple
    bound_values: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "phi_estimate": self.phi_estimate,
            "phi_lower_bound": self.phi_lower_bound,
            "coherence_t": self.coherence_t,
            "coherence_passes": self.coherence_passes,
            "mutual_coherence": self.mutual_coherence,
            "L": self.L,
            "K_nem": self.K_nem,
            "spectrum_min": self.spectrum[0],
            "spectrum_max": self.spectrum[1],
        }
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.bound_values:
            out["bounds"] = self.bound_values
        return out


def diagnose(X, S: StructureMatrix, mu: float, *, beta_star=None, Astar=None, lambda_n=None,
             samples: int = DEFAULT_CONE_SAMPLES, seed=0) -> DiagnosticsReport:
    """Assemble a report. Cone and coherence checks need A* (given or read
    off ``beta_star``); bounds need ``beta_star`` and ``lambda_n``."""
    from .structure import smoothness

    X = as_matrix(X, "X")
    G = build_gram(X, S, mu)
    eig = sym_eigvals(G.Kn)
    lower = max(float(eig[0]), 0.0)
    p = X.shape[1]
    if Astar is None and beta_star is not None:
        Astar = np.flatnonzero(as_vector(beta_star, "beta_star") != 0.0)
    t = passes = None
    est = lower
    if Astar is not None and 0 < len(Astar) < p:
        A = np.asarray(Astar, dtype=int)
        rho = 0.0
        if beta_star is not None and lambda_n:
            j2 = float(np.linalg.norm(np.asarray(S.Jtilde) @ beta_star))
            rho = cone_radius(lambda_n, mu, A.size, j2)
        theta = interaction_set(beta_star, S) if beta_star is not None else A
        est = estimate_phi(G, ConeSpec(theta, rho), samples, seed).phi_estimate
        coh = coherence_check(G, A)
        t, passes = coh.t, coh.passes
    off = G.Psi - np.diag(np.diag(G.Psi))
    bounds = {}
    alpha = None
    if beta_star is not None:
        beta_star = as_vector(beta_star, "beta_star")
        if p >= 2:
            alpha = smoothness(beta_star)
        if lambda_n and lower > 0:
            bounds = evaluate_bounds(beta_star, S, lambda_n, mu, lower).to_dict()
    return DiagnosticsReport(
        phi_estimate=est,
        phi_lower_bound=lower,
        coherence_t=t,
        coherence_passes=passes,
        mutual_coherence=float(np.max(np.abs(off))) if p > 1 else 0.0,
        L=assumption_E_L(X),
        K_nem=k_nem(p) if p >= 2 else None,
        alpha=alpha,
        spectrum=(float(eig[0]), float(eig[-1])),
        bound_values=bounds,
    )
