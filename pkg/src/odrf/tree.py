"""Decision-tree induction for the standard and double forest regimes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .data import Dataset, bootstrap, default_mtry, sample_feature_subset
from .split import (
    REG_EPS,
    TIKHONOV_SCALE,
    AxisRule,
    ObliqueRule,
    RotationRule,
    best_axis_split,
    lda_rotation_split,
    mpsvm_split,
    pca_rotation_split,
)


class VariantSpec(NamedTuple):
    double: bool
    splitter: str  # axis | mpsvm | pca | lda
    reg: str | None = None


VARIANTS = {
    "raf": VariantSpec(False, "axis"),
    "mpraf-t": VariantSpec(False, "mpsvm", "tikhonov"),
    "mpraf-p": VariantSpec(False, "mpsvm", "parallel"),
    "mpraf-n": VariantSpec(False, "mpsvm", "nullspace"),
    "raf-pca": VariantSpec(False, "pca"),
    "raf-lda": VariantSpec(False, "lda"),
    "draf": VariantSpec(True, "axis"),
    "mpdraf-t": VariantSpec(True, "mpsvm", "tikhonov"),
    "mpdraf-p": VariantSpec(True, "mpsvm", "parallel"),
    "mpdraf-n": VariantSpec(True, "mpsvm", "nullspace"),
    "draf-pca": VariantSpec(True, "pca"),
    "draf-lda": VariantSpec(True, "lda"),
}

# (standard, double) pairs
VARIANT_PAIRS = [
    ("raf", "draf"),
    ("mpraf-t", "mpdraf-t"),
    ("mpraf-p", "mpdraf-p"),
    ("mpraf-n", "mpdraf-n"),
    ("raf-pca", "draf-pca"),
    ("raf-lda", "draf-lda"),
]


class UnknownVariant(ValueError):
    pass


def normalize_variant(name: str) -> str:
    key = name.strip().lower().replace("_", "-")
    if key not in VARIANTS:
        raise UnknownVariant(f"unknown variant {name!r}; valid: {', '.join(VARIANTS)}")
    return key


@dataclass(frozen=True)
class TreeConfig:
    """Induction settings shared by every tree of a forest.

    ``mtry=None`` means ``round(sqrt(n))``. ``minleaf`` is the largest sample
    count an impure node may hold and still become a leaf. Double variants
    bootstrap a node only while it holds more than
    ``node_bootstrap_fraction * N`` samples.
    """

    variant: str = "raf"
    mtry: int | None = None
    minleaf: int = 1
    node_bootstrap_fraction: float = 0.1
    max_depth: int = 10_000
    routing: str = "proximity"
    fallback: str = "node"
    reg_eps: float = REG_EPS
    tikhonov_scale: float = TIKHONOV_SCALE

    def __post_init__(self):
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        if self.minleaf < 1:
            raise ValueError("minleaf must be >= 1")
        if not 0 < self.node_bootstrap_fraction <= 1:
            raise ValueError("node_bootstrap_fraction must lie in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.routing not in ("proximity", "bisector"):
            raise ValueError(f"unknown routing {self.routing!r}")
        if self.fallback not in ("node", "subtree"):
            raise ValueError(f"unknown fallback scope {self.fallback!r}")

    @property
    def spec(self) -> VariantSpec:
        return VARIANTS[self.variant]


@dataclass(eq=False)
class Leaf:
    distribution: np.ndarray
    predicted_class: int


@dataclass(eq=False)
class Internal:
    rule: AxisRule | ObliqueRule | RotationRule
    left: "Leaf | Internal"
    right: "Leaf | Internal"


@dataclass(eq=False)
class TrainedTree:
    root: Leaf | Internal
    n_features: int
    n_classes: int
    node_count: int = 0
    depth: int = 0
    seed: str = ""
    fallback_count: int = field(default=0, compare=False)


def make_leaf(y, n_classes) -> Leaf:
    counts = np.bincount(y, minlength=n_classes).astype(float)
    dist = counts / counts.sum()
    return Leaf(dist, int(np.argmax(dist)))


def find_split(X, y, n_classes, features, config: TreeConfig, axis_only=False):
    spec = config.spec
    if axis_only or spec.splitter == "axis":
        return best_axis_split(X, y, n_classes, features)
    if spec.splitter == "mpsvm":
        return mpsvm_split(X, y, n_classes, features, reg=spec.reg, routing=config.routing,
                           reg_eps=config.reg_eps, tikhonov_scale=config.tikhonov_scale)
    if spec.splitter == "pca":
        return pca_rotation_split(X, y, n_classes, features)
    return lda_rotation_split(X, y, n_classes, features)


def grow_tree(dataset: Dataset, root_indices, config: TreeConfig, rng: np.random.Generator,
              seed: str = "") -> TrainedTree:
    """Grow one tree from ``root_indices`` (duplicates allowed).

    Every node draws from its own generator, keyed by the tree stream and the
    node's left/right path from the root. A node's draws therefore do not
    depend on how the rest of the tree was grown, and a tree grown with a
    larger ``minleaf`` is a pruned copy of one grown with a smaller value.

    For double variants the split is searched on a node-level bootstrap of
    the node's samples, and if that resample admits no split the node's own
    samples are searched instead. The original samples are always what gets
    partitioned and passed down.
    """
    root_indices = np.asarray(root_indices, dtype=np.int64)
    if root_indices.size == 0:
        raise ValueError("cannot grow a tree from an empty index set")
    X, Y = dataset.samples, dataset.labels
    C, n, N = dataset.n_classes, dataset.n_features, dataset.n_samples
    mtry = config.mtry or default_mtry(n)
    double = config.spec.double
    boot_min = N * config.node_bootstrap_fraction
    stats = {"fallbacks": 0}
    entropy = int(rng.integers(0, 2**63))

    def build(idx, path, axis_only):
        y = Y[idx]
        depth = len(path)
        if depth >= config.max_depth or idx.size <= config.minleaf or np.all(y == y[0]):
            return make_leaf(y, C), []
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=path)))
        search = bootstrap(idx, rng) if double and idx.size > boot_min else idx
        features = sample_feature_subset(n, mtry, rng)
        outcome = find_split(X[search], Y[search], C, features, config, axis_only)
        if outcome is None and search is not idx:
            outcome = find_split(X[idx], y, C, features, config, axis_only)
        if outcome is None:
            return make_leaf(y, C), []
        left = outcome.rule.go_left(X[idx])
        nl = int(left.sum())
        if nl == 0 or nl == idx.size:
            return make_leaf(y, C), []
        node = Internal(outcome.rule, None, None)
        # subtree scope: once the axis-parallel regularizer fires, descendants stay axis-parallel
        child_axis = axis_only or (outcome.fallback_used and config.fallback == "subtree"
                                   and config.spec.reg == "parallel")
        stats["fallbacks"] += outcome.fallback_used
        return node, [(node, "left", idx[left], path + (0,), child_axis),
                      (node, "right", idx[~left], path + (1,), child_axis)]

    root, pending = build(root_indices, (), False)
    stack = list(reversed(pending))
    count, max_depth = 1, 0
    while stack:
        parent, side, idx, path, axis_only = stack.pop()
        node, children = build(idx, path, axis_only)
        setattr(parent, side, node)
        count += 1
        max_depth = max(max_depth, len(path))
        stack.extend(reversed(children))
    return TrainedTree(root, n, C, count, max_depth, seed, stats["fallbacks"])


def tree_leaves(tree: TrainedTree, X) -> list[Leaf]:
    """Leaf reached by every row of X."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != tree.n_features:
        raise ValueError(f"expected samples with {tree.n_features} features, got shape {X.shape}")
    out = [None] * X.shape[0]
    stack = [(tree.root, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if isinstance(node, Leaf):
            for r in rows:
                out[r] = node
            continue
        left = node.rule.go_left(X[rows])
        stack.append((node.left, rows[left]))
        stack.append((node.right, rows[~left]))
    return out


def predict_tree_batch(tree: TrainedTree, X) -> np.ndarray:
    return np.array([leaf.predicted_class for leaf in tree_leaves(tree, X)], dtype=np.int64)


def predict_tree(tree: TrainedTree, sample) -> int:
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict_tree expects a single feature vector")
    return int(predict_tree_batch(tree, x[None, :])[0])


def iter_nodes(root):
    """Pre-order traversal, left before right."""
    stack = [(root, 0)]
    while stack:
        node, depth = stack.pop()
        yield node, depth
        if isinstance(node, Internal):
            stack.append((node.right, depth + 1))
            stack.append((node.left, depth + 1))
