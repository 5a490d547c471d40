from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slasso.numkernel import DimensionError
from slasso.solver import (
    DegenerateProblemError,
    PenaltyConfig,
    SolverSettings,
    fit,
    fused_lasso_fit,
    fused_objective,
    kkt_oracle,
    kkt_oracle_fit,
    kkt_residual,
    objective,
    soft_threshold,
    tv_prox,
)
from slasso.structure import augment, build_structure

KINDS = ["lasso", "en", "slasso", "wfusion"]


def random_problem(rng, kind=None, p=None):
    p = int(rng.integers(2, 9)) if p is None else p
    n = int(rng.integers(5, 21))
    X = rng.standard_normal((n, p))
    beta = np.where(rng.random(p) < 0.5, rng.standard_normal(p) * 2, 0.0)
    y = X @ beta + 0.5 * rng.standard_normal(n)
    kind = kind or KINDS[int(rng.integers(len(KINDS)))]
    S = build_structure(kind, p, X=X)
    lam = float(rng.uniform(0.01, 1.0))
    mu = 0.0 if kind == "lasso" else float(rng.uniform(0.0, 2.0))
    return X, y, S, PenaltyConfig(lam, mu, S.kind)


def test_soft_threshold_examples():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-0.5, 1.0) == 0.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    with pytest.raises(ValueError):
        soft_threshold(1.0, -1.0)


def test_penalty_config_validation():
    with pytest.raises(ValueError):
        PenaltyConfig(-1.0)
    with pytest.raises(ValueError):
        PenaltyConfig(1.0, -0.1)
    with pytest.raises(ValueError):
        SolverSettings(max_iter=0)
    with pytest.raises(ValueError):
        SolverSettings(kkt_tol=0.0)


def test_objective_examples(rng):
    X = rng.standard_normal((4, 4))
    y = rng.standard_normal(4)
    S = build_structure("slasso", 4)
    assert objective(np.zeros(4), X, y, PenaltyConfig(1.0, 1.0), S) == pytest.approx(y @ y / 4)
    beta = np.linalg.solve(X, y)
    assert objective(beta, X, y, PenaltyConfig(0.0, 0.0), S) == pytest.approx(0.0, abs=1e-20 + 1e-24 * 0 + 1e-18)
    cfg = PenaltyConfig(0.3, 0.7, S.kind)
    b = rng.standard_normal(4)
    aug = augment(X, y, S, cfg.mu)
    direct = np.sum((aug.yaug - aug.Xaug @ b) ** 2) / 4 + cfg.lam * np.abs(b).sum()
    assert objective(b, X, y, cfg, S) == pytest.approx(direct, rel=1e-12)
    with pytest.raises(DimensionError):
        objective(np.zeros(3), X, y, cfg, S)


def test_null_solution_above_threshold(backend, rng):
    X = rng.standard_normal((12, 5))
    y = rng.standard_normal(12)
    S = build_structure("slasso", 5)
    aug = augment(X, y, S, 0.4)
    lam = 2.0 * np.max(np.abs(aug.Xaug.T @ aug.yaug)) / 12 * 1.0001
    res = fit(X, y, PenaltyConfig(lam, 0.4, S.kind), S)
    assert res.converged and not res.beta.any() and res.active_set.size == 0


def test_mu_zero_matches_lasso(backend, rng):
    for _ in range(20):
        X, y, _, cfg = random_problem(rng, "lasso")
        ref = fit(X, y, cfg, build_structure("lasso", X.shape[1])).beta
        for kind in ("en", "slasso"):
            S = build_structure(kind, X.shape[1])
            got = fit(X, y, PenaltyConfig(cfg.lam, 0.0, S.kind), S).beta
            assert np.max(np.abs(got - ref)) <= 1e-8


def test_fit_matches_oracle(backend):
    rng = np.random.default_rng(2024)
    for _ in range(40):
        X, y, S, cfg = random_problem(rng)
        res = fit(X, y, cfg, S)
        assert res.converged
        oracle = kkt_oracle_fit(X, y, cfg, S)
        assert np.max(np.abs(res.beta - oracle)) <= 1e-6


def test_fit_result_invariants(rng):
    X, y, S, cfg = random_problem(rng, "slasso", p=6)
    res = fit(X, y, cfg, S)
    assert res.objective == pytest.approx(objective(res.beta, X, y, cfg, S), rel=1e-10)
    assert np.array_equal(res.active_set, np.flatnonzero(res.beta))
    assert res.kkt_residual == kkt_residual(res.beta, X, y, cfg, S)
    assert res.kkt_residual <= 1e-8
    d = res.to_dict()
    assert set(d) == {"beta", "objective", "kkt_residual", "iterations", "converged", "active_set"}


def test_fit_deterministic(rng):
    X = rng.standard_normal((30, 60))
    y = rng.standard_normal(30)
    S = build_structure("slasso", 60)
    cfg = PenaltyConfig(0.05, 0.2, S.kind)
    a, b = fit(X, y, cfg, S), fit(X, y, cfg, S)
    assert a.beta.tobytes() == b.beta.tobytes() and a.iterations == b.iterations


def test_max_iter_exhausted_reports_best_iterate(rng):
    X = rng.standard_normal((20, 40))
    y = rng.standard_normal(20)
    S = build_structure("lasso", 40)
    res = fit(X, y, PenaltyConfig(0.001), S, SolverSettings(max_iter=3, kkt_tol=1e-14))
    assert not res.converged and res.iterations <= 3
    assert res.objective <= objective(np.zeros(40), X, y, PenaltyConfig(0.001), S)


def test_rejects_non_finite():
    S = build_structure("lasso", 2)
    with pytest.raises(ValueError):
        fit(np.array([[1.0, np.nan]]), np.ones(1), PenaltyConfig(0.1), S)
    with pytest.raises(DimensionError):
        fit(np.ones((3, 2)), np.ones(2), PenaltyConfig(0.1), S)


@pytest.mark.parametrize("kind", KINDS)
def test_trace_monotone(backend, rng, kind):
    X = rng.standard_normal((25, 40))
    y = X[:, :4] @ np.ones(4) + rng.standard_normal(25)
    S = build_structure(kind, 40, X=X)
    res = fit(X, y, PenaltyConfig(0.02, 0.0 if kind == "lasso" else 0.3, S.kind), S)
    tr = res.trace
    assert np.all(np.diff(tr) <= 1e-12 * (1.0 + np.abs(tr[:-1])))


def test_fixed_step_descent_without_backtracking(rng):
    # with L = 2 lambda_max the kernel never needs to increase L
    from slasso.solver import solve_gram

    X = rng.standard_normal((20, 10))
    y = rng.standard_normal(20)
    K = X.T @ X / 20
    L0 = 2.0 * np.linalg.eigvalsh(K)[-1] * (1 + 1e-12)
    _, _, _, _, L, trace = solve_gram(K, X.T @ y / 20, y @ y / 20, 0.05, lipschitz=L0)
    assert L == L0
    assert np.all(np.diff(trace) <= 1e-12 * (1 + np.abs(trace[:-1])))


def test_oracle_scalar_closed_form(rng):
    for _ in range(20):
        n = 10
        X = rng.standard_normal((n, 1))
        y = rng.standard_normal(n)
        lam, mu = float(rng.uniform(0, 1)), float(rng.uniform(0, 1))
        S = build_structure("en", 1)
        expect = soft_threshold(float(X[:, 0] @ y / n), lam / 2) / (float(X[:, 0] @ X[:, 0] / n) + mu)
        assert kkt_oracle_fit(X, y, PenaltyConfig(lam, mu), S)[0] == pytest.approx(expect, abs=1e-12)


def test_oracle_large_lambda_and_limits(rng):
    X = rng.standard_normal((8, 3))
    y = rng.standard_normal(8)
    S = build_structure("lasso", 3)
    assert not kkt_oracle_fit(X, y, PenaltyConfig(1e6), S).any()
    with pytest.raises(ValueError):
        kkt_oracle_fit(np.ones((3, 13)), np.ones(3), PenaltyConfig(1.0), build_structure("lasso", 13))


def test_oracle_flags_non_unique():
    # duplicated columns: many minimizers; the smallest l1 one splits the weight
    x = np.array([1.0, -1.0, 2.0, 0.5])
    X = np.column_stack([x, x])
    y = 2.0 * x
    sol = kkt_oracle(X, y, PenaltyConfig(0.0), build_structure("lasso", 2))
    assert not sol.unique
    assert np.abs(sol.beta).sum() == pytest.approx(2.0)


def test_oracle_zero_design_picks_smallest_l1():
    # every beta is optimal; only the empty support is regular
    sol = kkt_oracle(np.zeros((3, 2)), np.ones(3), PenaltyConfig(0.0), build_structure("lasso", 2))
    assert not sol.beta.any()
    assert issubclass(DegenerateProblemError, RuntimeError)


def test_tv_prox_wrapper():
    assert np.array_equal(tv_prox([1.0, 2.0, 3.0], 0.0), [1.0, 2.0, 3.0])
    assert np.allclose(tv_prox([0.0, 2.0], 0.5), [0.5, 1.5])
    assert np.allclose(tv_prox([1.0, 4.0, -2.0], 1e9), [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        tv_prox([1.0, 2.0], -1.0)


def test_fused_mu_zero_is_lasso(backend, rng):
    X = rng.standard_normal((15, 8))
    y = rng.standard_normal(15)
    a = fused_lasso_fit(X, y, 0.1, 0.0).beta
    b = fit(X, y, PenaltyConfig(0.1), build_structure("lasso", 8)).beta
    assert np.max(np.abs(a - b)) <= 1e-8


def test_fused_identity_design_is_prox(backend, rng):
    p = 6
    X = np.sqrt(p) * np.eye(p)
    y = rng.standard_normal(p)
    # ||y - sqrt(p) b||^2 / p + mu TV(b) = |b - y/sqrt(p)|^2 + mu TV(b)
    res = fused_lasso_fit(X, y, 0.0, 0.4, SolverSettings(kkt_tol=1e-10))
    assert np.allclose(res.beta, tv_prox(y / np.sqrt(p), 0.2), atol=1e-8)


def test_fused_objective_consistent(rng):
    X = rng.standard_normal((12, 5))
    y = rng.standard_normal(12)
    res = fused_lasso_fit(X, y, 0.05, 0.1)
    assert res.converged
    assert res.objective == pytest.approx(fused_objective(res.beta, X, y, 0.05, 0.1), rel=1e-10)
    for j in range(5):
        for h in (1e-5, -1e-5):
            b = res.beta.copy()
            b[j] += h
            assert fused_objective(b, X, y, 0.05, 0.1) >= res.objective - 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_fit_oracle_property(seed):
    rng = np.random.default_rng(seed)
    X, y, S, cfg = random_problem(rng)
    res = fit(X, y, cfg, S)
    assert res.converged
    assert np.max(np.abs(res.beta - kkt_oracle_fit(X, y, cfg, S))) <= 1e-6
