import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odrf.split import (
    AxisRule,
    ClassGaussian,
    ObliqueRule,
    RotationRule,
    best_axis_split,
    bhattacharyya,
    class_gaussians,
    gini_impurity,
    group_classes,
    lda_basis,
    lda_rotation_split,
    mpsvm_split,
    pca_rotation_split,
    weighted_gini,
)


def brute_force_axis(X, y, C):
    """Every (feature, midpoint) pair, evaluated directly."""
    best = None
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            t = (a + b) / 2
            imp = weighted_gini(y, X[:, j] <= t, C)
            if best is None or imp < best[0] - 1e-12:
                best = (imp, j, t)
    return best


def g1d(mu, var):
    return ClassGaussian(np.array([mu], float), np.array([[var]], float), 10)


def test_gini_examples():
    assert gini_impurity([5, 5]) == 0.5
    assert gini_impurity([10, 0]) == 0.0
    assert abs(gini_impurity([1, 2, 3]) - 11 / 18) < 1e-15


def test_axis_separable():
    out = best_axis_split(np.array([[1.0], [2.0], [3.0], [4.0]]), np.array([0, 0, 1, 1]), 2)
    assert out.rule == AxisRule(0, 2.5) and out.impurity == 0.0
    assert (out.left_count, out.right_count) == (2, 2)


def test_axis_constant_features():
    assert best_axis_split(np.ones((5, 3)), np.array([0, 1, 0, 1, 1]), 2) is None


def test_axis_respects_feature_subset():
    X = np.array([[0.0, 1.0], [0.0, 2.0], [1.0, 3.0], [1.0, 4.0]])
    out = best_axis_split(X, np.array([0, 0, 1, 1]), 2, features=[1])
    assert out.rule.feature == 1 and out.rule.threshold == 2.5


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 200), st.integers(1, 8), st.integers(2, 4), st.integers(0, 2**31), st.booleans())
def test_axis_matches_brute_force(n, d, C, seed, coarse):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(n, d)).astype(float) if coarse else rng.normal(size=(n, d))
    y = rng.integers(0, C, size=n)
    out = best_axis_split(X, y, C)
    ref = brute_force_axis(X, y, C)
    if ref is None or np.unique(y).size < 2:
        assert out is None
        return
    assert abs(out.impurity - ref[0]) < 1e-12
    assert abs(weighted_gini(y, out.rule.go_left(X), C) - out.impurity) < 1e-12
    assert out.left_count + out.right_count == n


def test_class_gaussian_hand_case():
    Z = np.array([[0.0, 0.0], [2.0, 0.0]])
    g = class_gaussians(Z, np.array([0, 0]), reg_eps=1e-6)[0]
    np.testing.assert_allclose(g.mean, [1, 0])
    # unbiased covariance [[2,0],[0,0]], then eps * I with eps = 1e-6 * max(mean diag, 1)
    np.testing.assert_allclose(g.covariance, [[2 + 1e-6, 0], [0, 1e-6]], rtol=0, atol=1e-15)


@pytest.mark.parametrize("Z", [np.array([[3.0, 4.0]]), np.array([[1.0, 1.0]] * 4)])
def test_class_gaussian_degenerate_is_eps_identity(Z):
    g = class_gaussians(Z, np.zeros(len(Z), int), reg_eps=1e-6)[0]
    np.testing.assert_allclose(g.covariance, 1e-6 * np.eye(2), rtol=0, atol=1e-18)


def test_bhattacharyya_hand_cases():
    assert abs(bhattacharyya(g1d(0, 1), g1d(0, 1))) < 1e-12
    assert abs(bhattacharyya(g1d(0, 1), g1d(2, 1)) - 0.5) < 1e-10
    assert abs(bhattacharyya(g1d(0, 1), g1d(0, 9)) - 0.5 * np.log(5 / 3)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31))
def test_bhattacharyya_symmetric_nonnegative(d, seed):
    rng = np.random.default_rng(seed)

    def rand_g():
        A = rng.normal(size=(d, d))
        return ClassGaussian(rng.normal(size=d), A @ A.T + 0.1 * np.eye(d), 5)

    a, b = rand_g(), rand_g()
    assert abs(bhattacharyya(a, b) - bhattacharyya(b, a)) < 1e-10
    assert bhattacharyya(a, b) >= -1e-12


def test_grouping_binary_passthrough():
    gs = {0: g1d(0, 1), 1: g1d(5, 1)}
    g = group_classes(gs)
    assert g.positive == {0} and g.negative == {1}


def test_grouping_three_clusters():
    eps = 1e-6
    gs = {0: g1d(0, eps), 1: g1d(2, eps), 2: g1d(10, eps)}
    g = group_classes(gs)
    assert g.positive == {0, 1} and g.negative == {2}


def test_grouping_tie_picks_lowest_pair():
    # all distances are equal: pair (0, 1) seeds, class 2 is not strictly closer to 0
    gs = {k: g1d(0, 1) for k in range(3)}
    g = group_classes(gs)
    assert g.positive == {0} and g.negative == {1, 2}


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_grouping_partitions_classes(C, seed):
    rng = np.random.default_rng(seed)
    gs = {k: ClassGaussian(rng.normal(size=2) * 3, np.eye(2) * rng.uniform(0.1, 2), 5) for k in range(C)}
    g = group_classes(gs)
    assert g.positive and g.negative and not (g.positive & g.negative)
    assert g.positive | g.negative == set(range(C))


@pytest.mark.parametrize("reg, atol", [("nullspace", 1e-8), ("tikhonov", 1e-3)])
def test_mpsvm_hand_square(reg, atol):
    # both Gram matrices are singular here; the ridge shift moves the planes slightly
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    y = np.array([0, 0, 1, 1])
    out = mpsvm_split(X, y, 2, [0, 1], reg=reg)
    assert isinstance(out.rule, ObliqueRule) and not out.fallback_used
    (w1, b1), (w2, b2) = out.rule.plane_pos, out.rule.plane_neg
    assert np.allclose(np.abs(w1), [0, 1], atol=atol) and abs(b1) < atol
    assert np.allclose(np.abs(w2), [0, 1], atol=atol) and abs(abs(b2) - 1) < atol
    np.testing.assert_array_equal(out.rule.go_left(X), [True, True, False, False])
    assert out.impurity == 0.0


def test_mpsvm_parallel_falls_back_on_rank_deficiency():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    y = np.array([0, 0, 1, 1])
    out = mpsvm_split(X, y, 2, [0, 1], reg="parallel")
    assert out.fallback_used and isinstance(out.rule, AxisRule)


@pytest.mark.parametrize("delta_scale", [1e-8, 1e-6, 1e-4, 1e-2])
def test_mpsvm_tikhonov_sweep_not_worse_than_parent(delta_scale):
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal([0, 0, 0], 0.5, (30, 3)), rng.normal([2, 1, 0], 0.5, (30, 3))])
    y = np.repeat([0, 1], 30)
    out = mpsvm_split(X, y, 2, [0, 1, 2], reg="tikhonov", tikhonov_scale=delta_scale)
    assert out.impurity <= gini_impurity(np.bincount(y)) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 60), st.integers(1, 5), st.integers(2, 4), st.integers(0, 2**31),
       st.sampled_from(["tikhonov", "parallel", "nullspace"]), st.sampled_from(["proximity", "bisector"]))
def test_mpsvm_properties(n, d, C, seed, reg, routing):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.integers(0, C, size=n)
    if np.unique(y).size < 2:
        return
    out = mpsvm_split(X, y, C, np.arange(d), reg=reg, routing=routing)
    if out is None:
        return
    parent = gini_impurity(np.bincount(y))
    assert out.impurity <= parent + 1e-12
    assert out.left_count + out.right_count == n and min(out.left_count, out.right_count) >= 1
    if isinstance(out.rule, ObliqueRule):
        for w, _ in (out.rule.plane_pos, out.rule.plane_neg):
            assert abs(np.linalg.norm(w) - 1) < 1e-12
        np.testing.assert_array_equal(out.rule.go_left(X), out.rule.go_left(X.copy()))


def test_proximity_ties_go_left():
    rule = ObliqueRule(np.array([0]), (np.array([1.0]), 1.0), (np.array([1.0]), -1.0))
    assert rule.go_left(np.array([[0.0]]))[0]


def test_pca_axis_aligned_matches_axis():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 2)) * [5.0, 1.0]
    y = (X[:, 0] > 0.3).astype(int)
    out = pca_rotation_split(X, y, 2, [0, 1])
    assert abs(out.impurity - best_axis_split(X, y, 2).impurity) < 1e-12


def test_pca_diagonal_clusters():
    t = np.linspace(0, 10, 11)
    X = np.vstack([np.c_[t, t], np.c_[t, t + 2]])
    y = np.repeat([0, 1], 11)
    out = pca_rotation_split(X, y, 2, [0, 1])
    V = out.rule.rotation
    # the (0, 2) offset between clusters tilts the leading axis slightly off the diagonal
    assert abs(V[:, 0] @ np.array([1, 1]) / np.sqrt(2)) > 0.999
    assert out.rule.rotated_feature == 1 and out.impurity == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 40), st.integers(1, 6), st.integers(0, 2**31), st.sampled_from(["pca", "lda"]))
def test_rotation_is_isometric_and_orthonormal(n, d, seed, kind):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, size=n)
    if np.unique(y).size < 2:
        return
    split = pca_rotation_split if kind == "pca" else lda_rotation_split
    out = split(X, y, 2, np.arange(d))
    if out is None:
        return
    V = out.rule.rotation
    if kind == "pca":
        np.testing.assert_allclose(V.T @ V, np.eye(d), atol=1e-10)
        Zr = X @ V
        for i, j in itertools.combinations(range(min(n, 6)), 2):
            assert abs(np.linalg.norm(Zr[i] - Zr[j]) - np.linalg.norm(X[i] - X[j])) < 1e-8
    else:
        np.testing.assert_allclose(np.linalg.norm(V, axis=0), 1.0, atol=1e-12)
    assert out.impurity <= gini_impurity(np.bincount(y)) + 1e-12


def test_lda_fisher_direction():
    rng = np.random.default_rng(2)
    d = np.array([3.0, 1.0]) / np.sqrt(10)
    X = np.vstack([rng.normal(size=(200, 2)), rng.normal(size=(200, 2)) + 4 * d])
    y = np.repeat([0, 1], 200)
    _, V, Sb, Sw = lda_basis(X, y)
    fisher = np.linalg.solve(Sw, X[y == 1].mean(0) - X[y == 0].mean(0))
    cos = abs(V[:, 0] @ fisher) / np.linalg.norm(fisher)
    assert cos >= 0.99
    assert abs(V[:, 0] @ d) >= 0.99


def test_lda_single_feature_is_axis():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0, 0, 1, 1])
    out = lda_rotation_split(X, y, 2, [0])
    assert isinstance(out.rule, RotationRule)
    assert abs(abs(out.rule.rotation[0, 0]) - 1) < 1e-12 and out.impurity == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(2, 6), st.integers(0, 2**31))
def test_lda_eigen_residual_and_rank(C, d, seed):
    rng = np.random.default_rng(seed)
    n = 12 * C
    X = rng.normal(size=(n, d)) + np.repeat(rng.normal(size=(C, d)) * 2, 12, axis=0)
    y = np.repeat(np.arange(C), 12)
    w, V, Sb, Sw = lda_basis(X, y)
    nb = np.linalg.norm(Sb)
    for lam, v in zip(w, V.T):
        assert np.linalg.norm(Sb @ v - lam * Sw @ v) <= 1e-6 * nb
    assert np.sum(w > 1e-9 * max(w.max(), 1)) <= C - 1
