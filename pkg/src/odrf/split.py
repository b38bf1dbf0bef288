"""Node-level split search.

Every finder takes the node's sample matrix (all n columns), its labels, the
class count and the column subset drawn for this node, and returns a
:class:`SplitOutcome` or ``None`` when no split separates the samples.

Rules route a sample to the left child when their ``go_left`` test holds;
axis and rotation rules compare with ``<=``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .linalg import (
    NotPositiveDefinite,
    _fix_signs,
    _pencil,
    cholesky,
    log_det_psd,
    solve_generalized_rayleigh,
    sym_eig,
    tikhonov_delta,
)

REG_EPS = 1e-6
TIKHONOV_SCALE = 1e-4


@dataclass(frozen=True)
class AxisRule:
    feature: int
    threshold: float

    def go_left(self, X):
        return X[:, self.feature] <= self.threshold


@dataclass(frozen=True, eq=False)
class ObliqueRule:
    """Pair of MPSVM clustering planes ``x.w - b = 0`` on a column subset.

    With ``routing="proximity"`` a sample goes left when it is at least as
    close to the positive-group plane as to the negative one. With
    ``routing="bisector"`` the stored ``bisector`` plane decides
    (``x.w - b <= 0`` goes left).
    """

    features: np.ndarray
    plane_pos: tuple[np.ndarray, float]
    plane_neg: tuple[np.ndarray, float]
    routing: str = "proximity"
    bisector: tuple[np.ndarray, float] | None = None

    def go_left(self, X):
        Z = X[:, self.features]
        if self.routing == "bisector":
            w, b = self.bisector
            return Z @ w - b <= 0
        (w1, b1), (w2, b2) = self.plane_pos, self.plane_neg
        return np.abs(Z @ w1 - b1) <= np.abs(Z @ w2 - b2)


@dataclass(frozen=True, eq=False)
class RotationRule:
    features: np.ndarray
    rotation: np.ndarray
    rotated_feature: int
    threshold: float
    kind: str

    def go_left(self, X):
        return X[:, self.features] @ self.rotation[:, self.rotated_feature] <= self.threshold


@dataclass(frozen=True)
class SplitOutcome:
    rule: AxisRule | ObliqueRule | RotationRule
    impurity: float
    left_count: int
    right_count: int
    fallback_used: bool = False


@dataclass(frozen=True, eq=False)
class ClassGaussian:
    mean: np.ndarray
    covariance: np.ndarray
    count: int


@dataclass(frozen=True)
class BinaryGrouping:
    positive: frozenset
    negative: frozenset


def gini_impurity(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini impurity of an empty node")
    p = counts / total
    return float(1.0 - np.sum(p * p))


def weighted_gini(y, left_mask, n_classes) -> float:
    n = y.size
    left = np.bincount(y[left_mask], minlength=n_classes)
    right = np.bincount(y[~left_mask], minlength=n_classes)
    nl, nr = left.sum(), right.sum()
    score = 0.0
    if nl:
        score += nl * gini_impurity(left)
    if nr:
        score += nr * gini_impurity(right)
    return float(score / n)


def _midpoint(a, b):
    mid = 0.5 * (a + b)
    return mid if a <= mid < b else a


def best_threshold(Z, y, n_classes):
    """Exhaustive Gini search over the columns of ``Z``.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Returns ``(column, threshold, impurity, left_count)`` for the
    lowest weighted child Gini (ties: lowest column, then lowest threshold),
    or None when every column is constant.
    """
    k, m = Z.shape
    if k < 2:
        return None
    order = np.argsort(Z, axis=0, kind="stable")
    Zs = np.take_along_axis(Z, order, axis=0)
    valid = Zs[1:] > Zs[:-1]
    if not valid.any():
        return None
    onehot = np.eye(n_classes)[y]
    left = np.cumsum(onehot[order], axis=0)[:-1]  # (k-1, m, C)
    right = onehot.sum(axis=0) - left
    nl = np.arange(1, k, dtype=float)[:, None]
    nr = k - nl
    score = np.sum(left * left, axis=2) / nl + np.sum(right * right, axis=2) / nr
    impurity = 1.0 - score / k
    impurity = np.where(valid, impurity, np.inf)
    pos = np.argmin(impurity, axis=0)
    best = impurity[pos, np.arange(m)]
    col = int(np.argmin(best))
    i = int(pos[col])
    thr = float(_midpoint(Zs[i, col], Zs[i + 1, col]))
    return col, thr, float(max(best[col], 0.0)), i + 1


def best_axis_split(X, y, n_classes, features=None) -> SplitOutcome | None:
    """Best single-feature threshold among ``features`` (all columns if None)."""
    if features is None:
        features = np.arange(X.shape[1])
    features = np.asarray(features)
    if y.size < 2 or np.unique(y).size < 2:
        return None
    found = best_threshold(X[:, features], y, n_classes)
    if found is None:
        return None
    col, thr, imp, nl = found
    return SplitOutcome(AxisRule(int(features[col]), thr), imp, nl, y.size - nl)


# -- multiclass to binary grouping ------------------------------------------

def class_gaussians(Z, y, reg_eps=REG_EPS) -> dict[int, ClassGaussian]:
    """Per-class mean and ridge-regularized sample covariance.

    Covariances use denominator ``max(count - 1, 1)`` and get
    ``eps * I`` added, ``eps = reg_eps * max(mean diagonal, 1)``.
    """
    out = {}
    m = Z.shape[1]
    for c in np.unique(y):
        Zc = Z[y == c]
        mu = Zc.mean(axis=0)
        D = Zc - mu
        cov = D.T @ D / max(Zc.shape[0] - 1, 1)
        eps = reg_eps * max(float(np.mean(np.diag(cov))), 1.0)
        out[int(c)] = ClassGaussian(mu, cov + eps * np.eye(m), Zc.shape[0])
    return out


def bhattacharyya(g1: ClassGaussian, g2: ClassGaussian) -> float:
    avg = 0.5 * (g1.covariance + g2.covariance)
    L = cholesky(avg)
    if L is None:
        raise NotPositiveDefinite("average covariance is singular")
    diff = np.linalg.solve(L, g2.mean - g1.mean)
    mahal = float(diff @ diff)
    logs = log_det_psd(avg) - 0.5 * (log_det_psd(g1.covariance) + log_det_psd(g2.covariance))
    return mahal / 8.0 + 0.5 * logs


def group_classes(gaussians: dict[int, ClassGaussian]) -> BinaryGrouping:
    """Merge the node's classes into two hyperclasses by Bhattacharyya distance.

    The farthest pair seeds the two groups (first pair wins a tie); every
    other class joins the seed it is strictly closer to, else the negative
    group.
    """
    classes = sorted(gaussians)
    if len(classes) < 2:
        raise ValueError("grouping needs at least two classes")
    if len(classes) == 2:
        return BinaryGrouping(frozenset([classes[0]]), frozenset([classes[1]]))
    dist = {}
    for a, b in combinations(classes, 2):
        dist[a, b] = dist[b, a] = bhattacharyya(gaussians[a], gaussians[b])
    best = None
    for a, b in combinations(classes, 2):
        if best is None or dist[a, b] > dist[best]:
            best = (a, b)
    p, n = best
    pos, neg = {p}, {n}
    for c in classes:
        if c in (p, n):
            continue
        (pos if dist[c, p] < dist[c, n] else neg).add(c)
    return BinaryGrouping(frozenset(pos), frozenset(neg))


# -- MPSVM oblique split -----------------------------------------------------

def _augmented_gram(M):
    Me = np.hstack([M, -np.ones((M.shape[0], 1))])
    return Me.T @ Me


def _plane(r):
    w, b = r[:-1], float(r[-1])
    nw = np.linalg.norm(w)
    if not nw > 1e-12 * np.linalg.norm(r):
        return None
    return w / nw, b / nw


def _axis_fallback(X, y, n_classes, features):
    out = best_axis_split(X, y, n_classes, features)
    if out is None:
        return None
    return SplitOutcome(out.rule, out.impurity, out.left_count, out.right_count, True)


def mpsvm_split(X, y, n_classes, features, reg="tikhonov", routing="proximity",
                grouping=None, reg_eps=REG_EPS, tikhonov_scale=TIKHONOV_SCALE) -> SplitOutcome | None:
    """Oblique split from the two MPSVM clustering planes.

    ``reg`` selects how a rank-deficient Gram matrix is handled:
    ``"tikhonov"`` shifts it by ``delta * I``, ``"parallel"`` returns the
    best axis split instead (``fallback_used`` set), ``"nullspace"`` solves
    inside the null space of the singular matrix. An oblique rule that leaves
    one side empty also falls back to an axis split.
    """
    features = np.asarray(features)
    present = np.unique(y)
    if present.size < 2:
        return None
    Z = X[:, features]
    if grouping is None:
        if present.size == 2:
            grouping = BinaryGrouping(frozenset([int(present[0])]), frozenset([int(present[1])]))
        else:
            grouping = group_classes(class_gaussians(Z, y, reg_eps))
    pos = np.isin(y, list(grouping.positive))
    if pos.all() or not pos.any():
        raise ValueError("both hyperclasses must be non-empty at the node")
    P = _augmented_gram(Z[pos])
    Q = _augmented_gram(Z[~pos])

    if reg == "parallel":
        if cholesky(P) is None or cholesky(Q) is None:
            return _axis_fallback(X, y, n_classes, features)
        mode = "none"
    elif reg in ("tikhonov", "nullspace"):
        mode = reg
    else:
        raise ValueError(f"unknown MPSVM regularization {reg!r}")
    try:
        r_min, r_max = solve_generalized_rayleigh(P, Q, mode, delta_scale=tikhonov_scale)
    except np.linalg.LinAlgError:
        return _axis_fallback(X, y, n_classes, features)
    plane_pos, plane_neg = _plane(r_min.vector), _plane(r_max.vector)
    if plane_pos is None or plane_neg is None:
        return _axis_fallback(X, y, n_classes, features)

    if routing == "proximity":
        rule = ObliqueRule(features, plane_pos, plane_neg)
        left = rule.go_left(X)
    elif routing == "bisector":
        (w1, b1), (w2, b2) = plane_pos, plane_neg
        rule, left, best_imp = None, None, np.inf
        for s in (1.0, -1.0):
            w, b = w1 + s * w2, b1 + s * b2
            nw = np.linalg.norm(w)
            if nw < 1e-12:
                continue
            cand = ObliqueRule(features, plane_pos, plane_neg, "bisector", (w / nw, b / nw))
            mask = cand.go_left(X)
            imp = weighted_gini(y, mask, n_classes)
            if imp < best_imp:
                rule, left, best_imp = cand, mask, imp
        if rule is None:
            return _axis_fallback(X, y, n_classes, features)
    else:
        raise ValueError(f"unknown routing {routing!r}")

    nl = int(left.sum())
    if nl == 0 or nl == y.size:
        return _axis_fallback(X, y, n_classes, features)
    return SplitOutcome(rule, weighted_gini(y, left, n_classes), nl, y.size - nl)


# -- rotation splits ---------------------------------------------------------

def _rotation_outcome(Z, V, y, n_classes, features, kind):
    found = best_threshold(Z @ V, y, n_classes)
    if found is None:
        return None
    col, thr, imp, nl = found
    return SplitOutcome(RotationRule(features, V, col, thr, kind), imp, nl, y.size - nl)


def pca_rotation_split(X, y, n_classes, features) -> SplitOutcome | None:
    """Rotate the column subset onto all principal axes of the node scatter, then axis-search."""
    features = np.asarray(features)
    if y.size < 2 or np.unique(y).size < 2:
        return None
    Z = X[:, features]
    D = Z - Z.mean(axis=0)
    _, V = sym_eig(D.T @ D)
    return _rotation_outcome(Z, V[:, ::-1].copy(), y, n_classes, features, "pca")


def lda_basis(Z, y):
    """Generalized eigenvectors of (between, within) scatter, descending, unit-norm columns."""
    mu = Z.mean(axis=0)
    m = Z.shape[1]
    Sw = np.zeros((m, m))
    Sb = np.zeros((m, m))
    for c in np.unique(y):
        Zc = Z[y == c]
        mc = Zc.mean(axis=0)
        D = Zc - mc
        Sw += D.T @ D
        diff = (mc - mu)[:, None]
        Sb += Zc.shape[0] * (diff @ diff.T)
    L = cholesky(Sw)
    if L is None:
        Sw = Sw + tikhonov_delta(Sw) * np.eye(m)
        L = np.linalg.cholesky(Sw)
    w, R = _pencil(Sb, L)
    R = R[:, ::-1] / np.linalg.norm(R[:, ::-1], axis=0)
    return w[::-1], _fix_signs(R), Sb, Sw


def lda_rotation_split(X, y, n_classes, features) -> SplitOutcome | None:
    features = np.asarray(features)
    if y.size < 2 or np.unique(y).size < 2:
        return None
    Z = X[:, features]
    _, V, _, _ = lda_basis(Z, y)
    return _rotation_outcome(Z, V, y, n_classes, features, "lda")
