from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slasso.numkernel import DimensionError
from slasso.simulate import piecewise_linear_beta
from slasso.structure import (
    StructureKind,
    augment,
    build_structure,
    from_matrix,
    interaction_set,
    load_custom_csv,
    quad_penalty,
    smoothness,
)

KINDS = ["lasso", "en", "slasso", "wfusion"]


def _build(kind, p, rng):
    X = rng.standard_normal((10, p)) if kind == "wfusion" else None
    return build_structure(kind, p, X=X)


def test_smooth_lasso_layout():
    S = build_structure(StructureKind.SMOOTH_LASSO, 3)
    assert np.array_equal(S.J, [[0, 0, 0], [1, -1, 0], [0, 1, -1]])
    assert np.array_equal(S.Jtilde, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    assert S.m == 3 and S.p == 3


def test_elastic_net_identity():
    S = build_structure("en", 4)
    assert np.array_equal(S.J, np.eye(4)) and np.array_equal(S.Jtilde, np.eye(4))


def test_lasso_zero():
    S = build_structure("lasso", 3)
    assert not S.J.any() and not S.Jtilde.any()


@pytest.mark.parametrize("kind", ["slasso", "wfusion"])
def test_minimum_dimension(kind):
    with pytest.raises(ValueError):
        build_structure(kind, 1, X=np.ones((3, 1)))


def test_custom_requires_matching_columns():
    with pytest.raises(DimensionError):
        build_structure("custom", 3, matrix=np.ones((2, 4)))


def test_weighted_fusion_signs_and_weights(rng):
    X = rng.standard_normal((50, 3))
    X[:, 1] = -X[:, 0] + 0.1 * X[:, 1]
    S = build_structure("wfusion", 3, X=X)
    corr = X.T @ X / 50
    assert S.J[0, 1] == pytest.approx(abs(corr[0, 1]))  # negative correlation gives +w
    assert np.allclose(np.diag(S.J), np.abs(np.diag(corr)))
    with pytest.raises(ValueError):
        build_structure("wfusion", 3, X=X, weights=-np.ones((3, 3)))
    with pytest.raises(ValueError):
        build_structure("wfusion", 3, X=X, weights=np.triu(np.ones((3, 3))))


def test_quad_penalty_examples():
    S = build_structure("slasso", 3)
    assert quad_penalty([1.0, 1.0, 1.0], S) == 0.0
    assert quad_penalty([1.0, 0.0, 1.0], S) == 2.0
    assert quad_penalty([2.0, 3.0], build_structure("en", 2)) == 13.0
    with pytest.raises(DimensionError):
        quad_penalty([1.0, 2.0], S)


def test_smoothness_examples():
    assert smoothness([5.0, 5.0, 5.0, 5.0]) == 0.0
    assert smoothness([0.0, 1.0, 0.0, 1.0]) == 3.0
    with pytest.raises(ValueError):
        smoothness([1.0])


def test_smoothness_piecewise_linear_closed_form():
    n = 40
    beta = piecewise_linear_beta(n)
    assert beta.size == 19 and beta[:10].tolist() == [1.0] * 10
    assert smoothness(beta) == pytest.approx(4 / n - 16 / n**2, abs=1e-12)
    assert smoothness(beta) == pytest.approx(0.09, abs=1e-12)
    # the trailing zero at j = n/2 contributes one more squared step
    padded = piecewise_linear_beta(n, length=n // 2)
    assert smoothness(padded) == pytest.approx(4 / n, abs=1e-12)


def test_augment_shapes_and_blocks(rng):
    X = rng.standard_normal((10, 4))
    y = rng.standard_normal(10)
    aug = augment(X, y, build_structure("slasso", 4), 0.3)
    assert aug.Xaug.shape == (14, 4) and aug.yaug.shape == (14,)
    assert np.array_equal(aug.Xaug[:10], X)
    assert not aug.yaug[10:].any()
    aug0 = augment(X, y, build_structure("slasso", 4), 0.0)
    assert not aug0.Xaug[10:].any()


def test_augment_sqrt_n_mu_block():
    aug = augment(np.ones((2, 2)), np.ones(2), build_structure("en", 2), 0.5)
    assert np.allclose(aug.Xaug[2:], np.eye(2))


def test_augment_rejects_negative_mu():
    with pytest.raises(ValueError):
        augment(np.ones((2, 2)), np.ones(2), build_structure("en", 2), -0.1)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(KINDS), st.sampled_from([0.0, 0.1, 1.0, 10.0]), st.integers(2, 8),
       st.integers(0, 2**31 - 1))
def test_augmented_objective_identity(kind, mu, p, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    beta = rng.standard_normal(p)
    S = build_structure(kind, p, X=X)
    aug = augment(X, y, S, mu)
    lhs = np.sum((aug.yaug - aug.Xaug @ beta) ** 2) / n
    rhs = np.sum((y - X @ beta) ** 2) / n + mu * beta @ S.Jtilde @ beta
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(KINDS), st.integers(2, 10), st.integers(0, 2**31 - 1))
def test_jtilde_psd_and_penalty_matches(kind, p, seed):
    rng = np.random.default_rng(seed)
    S = _build(kind, p, rng)
    assert np.linalg.eigvalsh(S.Jtilde)[0] >= -1e-10
    assert np.allclose(S.Jtilde, S.J.T @ S.J, atol=1e-12)
    beta = rng.standard_normal(p)
    assert quad_penalty(beta, S) == pytest.approx(np.sum((S.J @ beta) ** 2), rel=1e-12, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=12), st.integers(-5, 5))
def test_smoothness_shift_invariant(values, c):
    beta = np.array(values)
    # integer shifts keep the differences exactly representable
    assert smoothness(beta + c) == pytest.approx(smoothness(beta), rel=1e-12, abs=1e-12)
    assert smoothness(beta) == pytest.approx(quad_penalty(beta, build_structure("slasso", beta.size)), rel=1e-12)


def test_structure_arrays_read_only():
    S = build_structure("slasso", 3)
    with pytest.raises(ValueError):
        S.J[0, 0] = 1.0


def test_custom_csv(tmp_path):
    path = tmp_path / "J.csv"
    path.write_text("1,0,0\n0,1,-1\n")
    S = load_custom_csv(path)
    assert S.kind is StructureKind.CUSTOM and S.m == 2 and S.p == 3


def test_interaction_set_sizes(rng):
    p = 30
    sl = build_structure("slasso", p)
    en = build_structure("en", p)
    for _ in range(50):
        beta = np.zeros(p)
        beta[rng.choice(p, size=int(rng.integers(1, 8)), replace=False)] = rng.standard_normal()
        A = np.flatnonzero(beta)
        assert np.array_equal(interaction_set(beta, en), A)
        B = interaction_set(beta, sl)
        assert set(A) <= set(B) and B.size <= 3 * A.size


def test_from_matrix_symmetrizes():
    S = from_matrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert np.array_equal(S.Jtilde, S.Jtilde.T)
