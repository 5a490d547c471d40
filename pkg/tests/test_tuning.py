from __future__ import annotations

import math

import numpy as np
import pytest

from slasso.solver import PenaltyConfig, SolverSettings, fit
from slasso.structure import build_structure
from slasso.tuning import (
    CV_SETTINGS,
    TheoreticalTuning,
    UnpenalizedStructureError,
    Variant,
    cross_validate,
    default_lambda_grid,
    default_mu_grid,
    fold_assignment,
    k_nem,
    k_nem_argmin,
    lambda_null,
    nongaussian_lambda,
    path_fits,
    structure_norm,
    theoretical_lambda,
    theoretical_mu,
    tuning_for_truth,
)

ETA_VARIANTS = [v for v in Variant if v not in (Variant.EXPERIMENTAL, Variant.THEOREM5)]


def test_lambda_examples():
    assert theoretical_lambda(1.0, 100, 8, 0.05) == pytest.approx(4 * math.sqrt(2) * math.sqrt(math.log(160) / 100))
    assert theoretical_lambda(1.0, 100, 8, 0.05) == pytest.approx(1.27438, abs=1e-5)
    assert theoretical_lambda(2.0, 50, 10, 0.1, Variant.PROPOSITION1) == pytest.approx(
        2 * math.sqrt(2) * 2 * math.sqrt(math.log(100) / 50))
    assert theoretical_lambda(1.0, 30, 100, variant="experimental") == pytest.approx(
        2 * math.sqrt(2) * math.sqrt(math.log(100) / 30))
    assert theoretical_lambda(1.0, 10, 4, 0.2, Variant.THEOREM3) == pytest.approx(
        2 * theoretical_lambda(1.0, 10, 4, 0.2, Variant.THEOREM1))
    inner = math.sqrt(0.1 * 20 / 21)
    assert theoretical_lambda(1.0, 40, 20, 0.1, Variant.THEOREM4) == pytest.approx(
        16 * math.sqrt(math.log(20 / inner) / 40))


@pytest.mark.parametrize("variant", ETA_VARIANTS)
def test_lambda_decreases_in_eta_and_n(variant):
    etas = [0.01, 0.05, 0.1, 0.3, 0.9]
    vals = [theoretical_lambda(1.0, 50, 30, e, variant) for e in etas]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert theoretical_lambda(1.0, 100, 30, 0.1, variant) < theoretical_lambda(1.0, 50, 30, 0.1, variant)
    assert theoretical_lambda(2.0, 50, 30, 0.1, variant) == pytest.approx(
        2 * theoretical_lambda(1.0, 50, 30, 0.1, variant))


def test_experimental_ignores_eta():
    a = theoretical_lambda(1.0, 50, 30, 0.01, Variant.EXPERIMENTAL)
    assert a == theoretical_lambda(1.0, 50, 30, 0.5, Variant.EXPERIMENTAL)


def test_lambda_rejects_bad_input():
    for args in [(0.0, 10, 5), (1.0, 0, 5), (1.0, 10, 1), (1.0, 10, 5, 1.0), (1.0, 10, 5, 0.0)]:
        with pytest.raises(ValueError):
            theoretical_lambda(*args)
    with pytest.raises(ValueError):
        theoretical_lambda(1.0, 10, 5, 0.1, Variant.THEOREM5)


def test_mu_rules():
    assert theoretical_mu(2.0, 4, 0.5) == pytest.approx(2.0 * 2 / (2 * 0.5))
    assert theoretical_mu(2.0, 4, 0.5, Variant.THEOREM3) == pytest.approx(2.0 / (8 * 0.5))
    for v in (Variant.PROPOSITION2, Variant.THEOREM4, Variant.THEOREM5):
        assert theoretical_mu(2.0, 4, 0.5, v) == pytest.approx(1.0)
    with pytest.raises(UnpenalizedStructureError):
        theoretical_mu(1.0, 3, 0.0)
    with pytest.raises(ValueError):
        theoretical_mu(0.0, 3, 1.0)


def test_structure_norm_and_truth():
    S = build_structure("slasso", 5)
    b = np.array([0.0, 1.0, 1.0, 3.0, 0.0])
    # Jtilde b = J'J b = (-1, 1, -2, 5, -3)
    assert np.allclose(S.Jtilde @ b, [-1, 1, -2, 5, -3])
    assert structure_norm(b, S) == pytest.approx(math.sqrt(40))
    assert structure_norm(b, S, Variant.THEOREM3) == pytest.approx(5.0)
    t = tuning_for_truth(1.0, 50, b, S)
    assert isinstance(t, TheoreticalTuning)
    assert t.mu_n == pytest.approx(t.lambda_n * math.sqrt(3) / (2 * math.sqrt(40)))
    # the lasso structure never binds
    const = tuning_for_truth(1.0, 50, np.ones(5), build_structure("lasso", 5))
    assert const.mu_n == 0.0
    with pytest.raises(ValueError):
        TheoreticalTuning(0.0, 1.0, 0.1, Variant.THEOREM1)


def test_k_nem_values_and_bracket():
    assert k_nem(8) == pytest.approx(7.91698, abs=1e-5)
    assert k_nem_argmin(2) == 2.0 and k_nem(2) == pytest.approx(2.0)
    for p in (8, 100, 1000, 4088):
        val = k_nem(p)
        lp = math.log(p)
        assert 2 * math.e * lp - 3 * math.e < val < 2 * math.e * lp - math.e
        q = k_nem_argmin(p)
        deriv = p ** (2 / q) * (1 - 2 * (q - 1) * lp / q ** 2)
        assert abs(deriv) <= 1e-6 * val
        grid = np.linspace(2, 60, 20001)
        assert val <= np.min((grid - 1) * p ** (2 / grid)) + 1e-12


def test_nongaussian_lambda():
    assert nongaussian_lambda(1.0, 100, 8, 0.1, 1.0) == pytest.approx(3.559, abs=1e-3)
    assert theoretical_lambda(1.0, 100, 8, 0.1, Variant.THEOREM5, L=1.0) == nongaussian_lambda(1.0, 100, 8, 0.1, 1.0)
    with pytest.raises(ValueError):
        nongaussian_lambda(1.0, 100, 8, 0.1, 0.0)


def test_grids(rng):
    X = rng.standard_normal((20, 6))
    y = rng.standard_normal(20)
    g = default_lambda_grid(X, y, points=7, ratio=1e-2)
    assert g.size == 7 and g[0] == pytest.approx(lambda_null(X, y)) and g[-1] == pytest.approx(g[0] * 1e-2)
    assert np.all(np.diff(g) < 0)
    m = default_mu_grid(5)
    assert m[0] == 0 and m.size == 6
    assert not fit(X, y, PenaltyConfig(g[0]), build_structure("lasso", 6)).beta.any()
    assert np.array_equal(default_lambda_grid(X, np.zeros(20)), [0.0])


def test_fold_assignment_partitions():
    parts = fold_assignment(23, 5, 7)
    allidx = np.sort(np.concatenate(parts))
    assert np.array_equal(allidx, np.arange(23))
    assert {len(p) for p in parts} <= {4, 5}
    again = fold_assignment(23, 5, 7)
    assert all(np.array_equal(a, b) for a, b in zip(parts, again))
    with pytest.raises(ValueError):
        fold_assignment(3, 4, 0)
    with pytest.raises(ValueError):
        fold_assignment(10, 1, 0)


def test_path_fits_match_cold_fits(rng):
    X = rng.standard_normal((15, 6))
    y = rng.standard_normal(15)
    S = build_structure("slasso", 6)
    lam = np.array([0.5, 0.1, 0.01])
    mu = np.array([0.0, 0.3])
    tight = SolverSettings(kkt_tol=1e-10)
    paths = path_fits(X.T @ X / 15, X.T @ y / 15, y @ y / 15, S.Jtilde, lam, mu, settings=tight)
    assert paths.shape == (3, 2, 6)
    for i in range(3):
        for j in range(2):
            cold = fit(X, y, PenaltyConfig(lam[i], mu[j], S.kind), S, tight).beta
            assert np.max(np.abs(paths[i, j] - cold)) <= 1e-7


def test_cross_validate_deterministic_and_shapes(rng):
    X = rng.standard_normal((30, 10))
    y = X[:, :3] @ np.ones(3) + rng.standard_normal(30)
    S = build_structure("slasso", 10)
    lam = default_lambda_grid(X, y, points=6, ratio=1e-2)
    mu = np.array([0.0, 0.1, 1.0])
    a = cross_validate(X, y, S, lam, mu, folds=5, seed=3)
    b = cross_validate(X, y, S, lam, mu, folds=5, seed=3)
    assert a.best_lambda == b.best_lambda and a.best_mu == b.best_mu
    assert a.mean_error.tobytes() == b.mean_error.tobytes()
    assert a.fold_errors.shape == (6, 3, 5)
    assert len(a.surface()) == 18
    i = int(np.argmin(np.abs(lam - a.best_lambda)))
    j = int(np.argmin(np.abs(mu - a.best_mu)))
    assert a.mean_error[i, j] == a.mean_error.min()


def test_cross_validate_single_cell(rng):
    X = rng.standard_normal((12, 4))
    y = rng.standard_normal(12)
    res = cross_validate(X, y, build_structure("en", 4), [0.2], [0.5], folds=3)
    assert (res.best_lambda, res.best_mu) == (0.2, 0.5)


def test_cross_validate_mu_zero_is_lasso(rng):
    X = rng.standard_normal((20, 8))
    y = rng.standard_normal(20)
    lam = default_lambda_grid(X, y, points=5, ratio=1e-2)
    a = cross_validate(X, y, build_structure("slasso", 8), lam, [0.0], folds=4, seed=1)
    b = cross_validate(X, y, build_structure("lasso", 8), lam, [0.0], folds=4, seed=1)
    assert np.allclose(a.mean_error, b.mean_error, rtol=1e-6, atol=1e-10)
    assert a.best_lambda == b.best_lambda


def test_cross_validate_ties_prefer_larger_parameters():
    # y = 0 makes every fit zero, so every cell ties
    X = np.random.default_rng(0).standard_normal((10, 3))
    res = cross_validate(X, np.zeros(10), build_structure("en", 3), [0.1, 0.5, 0.3], [0.0, 2.0, 1.0], folds=2)
    assert (res.best_lambda, res.best_mu) == (0.5, 2.0)


def test_cross_validate_fused(rng):
    X = rng.standard_normal((16, 6))
    y = rng.standard_normal(16)
    res = cross_validate(X, y, None, [0.3, 0.05], [0.0, 0.2], folds=4, fused=True)
    assert res.mean_error.shape == (2, 2)
    with pytest.raises(Exception):
        cross_validate(X, y, None, [0.3], [0.0], folds=4)


def test_cv_settings_tolerance():
    assert CV_SETTINGS.kkt_tol == 1e-6
