"""Forest training, majority-vote prediction and model persistence."""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, bootstrap, tree_stream
from .split import AxisRule, ObliqueRule, RotationRule
from .tree import Internal, Leaf, TrainedTree, TreeConfig, grow_tree, iter_nodes, predict_tree_batch

FORMAT_VERSION = 1
WORKERS_ENV = "ODRF_WORKERS"


class FeatureMismatch(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ForestConfig:
    tree_config: TreeConfig = field(default_factory=TreeConfig)
    n_trees: int = 50
    master_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")


@dataclass(eq=False)
class Forest:
    trees: list[TrainedTree]
    config: ForestConfig
    class_names: list[str]
    feature_names: list[str]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _grow_one(dataset: Dataset, config: ForestConfig, i: int) -> TrainedTree:
    rng = tree_stream(config.master_seed, i)
    all_rows = np.arange(dataset.n_samples)
    # standard variants bag at the root; double variants bag inside each node
    root = all_rows if config.tree_config.spec.double else bootstrap(all_rows, rng)
    return grow_tree(dataset, root, config.tree_config, rng, seed=f"{config.master_seed}:{i}")


def _grow_chunk(args):
    dataset, config, indices = args
    return [_grow_one(dataset, config, i) for i in indices]


def train_forest(dataset: Dataset, config: ForestConfig, workers: int | None = None) -> Forest:
    """Train ``config.n_trees`` trees; output is independent of ``workers``."""
    workers = default_workers() if workers is None else max(1, workers)
    L = config.n_trees
    if workers == 1 or L == 1:
        trees = [_grow_one(dataset, config, i) for i in range(L)]
    else:
        chunks = [list(range(L))[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_grow_chunk, [(dataset, config, c) for c in chunks if c]))
        trees = [None] * L
        for chunk, grown in zip([c for c in chunks if c], results):
            for i, t in zip(chunk, grown):
                trees[i] = t
    return Forest(trees, config, list(dataset.class_names), list(dataset.feature_names))


def _as_matrix(forest: Forest, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise FeatureMismatch(
            f"model expects {forest.n_features} features, data has {X.shape[-1] if X.ndim else 0}")
    return X


def tree_predictions(forest: Forest, X) -> np.ndarray:
    """(L, M) matrix of per-tree class predictions."""
    X = _as_matrix(forest, X)
    return np.stack([predict_tree_batch(t, X) for t in forest.trees])


def vote_counts(forest: Forest, X) -> np.ndarray:
    preds = tree_predictions(forest, X)
    M = preds.shape[1]
    votes = np.zeros((M, forest.n_classes), dtype=np.int64)
    for row in preds:
        votes[np.arange(M), row] += 1
    return votes


def predict_forest_batch(forest: Forest, X) -> np.ndarray:
    # argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(vote_counts(forest, X), axis=1)


def predict_forest(forest: Forest, sample) -> int:
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict_forest expects a single feature vector")
    return int(predict_forest_batch(forest, x)[0])


def evaluate(forest: Forest, dataset: Dataset) -> tuple[float, np.ndarray]:
    preds = predict_forest_batch(forest, dataset.samples)
    return float(np.mean(preds == dataset.labels)), preds


def confusion_matrix(y_true, y_pred, n_classes) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


# -- persistence -------------------------------------------------------------
# Trees are stored as pre-order node tables; children are referenced by
# position, which keeps deep trees clear of recursion limits.

def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _encode_node(node, left=None, right=None) -> dict:
    if isinstance(node, Leaf):
        return {"type": "leaf", "class": int(node.predicted_class),
                "distribution": _floats(node.distribution)}
    rule = node.rule
    if isinstance(rule, AxisRule):
        out = {"type": "axis", "feature": int(rule.feature), "threshold": float(rule.threshold)}
    elif isinstance(rule, ObliqueRule):
        out = {"type": "oblique", "features": [int(f) for f in rule.features],
               "w_pos": _floats(rule.plane_pos[0]), "b_pos": float(rule.plane_pos[1]),
               "w_neg": _floats(rule.plane_neg[0]), "b_neg": float(rule.plane_neg[1]),
               "routing": rule.routing}
        if rule.bisector is not None:
            out["w_bisector"] = _floats(rule.bisector[0])
            out["b_bisector"] = float(rule.bisector[1])
    elif isinstance(rule, RotationRule):
        out = {"type": "rotation", "kind": rule.kind, "features": [int(f) for f in rule.features],
               "rotation": _floats(rule.rotation), "rotated_feature": int(rule.rotated_feature),
               "threshold": float(rule.threshold)}
    else:  # pragma: no cover
        raise TypeError(f"cannot encode rule {rule!r}")
    out["left"], out["right"] = left, right
    return out


def _encode_tree(tree: TrainedTree) -> dict:
    nodes = list(iter_nodes(tree.root))
    position = {id(node): k for k, (node, _) in enumerate(nodes)}
    table = []
    for node, _ in nodes:
        if isinstance(node, Internal):
            table.append(_encode_node(node, position[id(node.left)], position[id(node.right)]))
        else:
            table.append(_encode_node(node))
    return {"seed": tree.seed, "node_count": tree.node_count, "depth": tree.depth,
            "fallback_count": tree.fallback_count, "nodes": table}


def _decode_rule(d):
    kind = d["type"]
    if kind == "axis":
        return AxisRule(int(d["feature"]), float(d["threshold"]))
    if kind == "oblique":
        bis = None
        if "w_bisector" in d:
            bis = (np.array(d["w_bisector"], dtype=float), float(d["b_bisector"]))
        return ObliqueRule(np.array(d["features"], dtype=np.int64),
                           (np.array(d["w_pos"], dtype=float), float(d["b_pos"])),
                           (np.array(d["w_neg"], dtype=float), float(d["b_neg"])),
                           d.get("routing", "proximity"), bis)
    if kind == "rotation":
        return RotationRule(np.array(d["features"], dtype=np.int64),
                            np.array(d["rotation"], dtype=float),
                            int(d["rotated_feature"]), float(d["threshold"]), d["kind"])
    raise ModelFormatError(f"unknown node type {kind!r}")


def _decode_tree(d, n_features, n_classes) -> TrainedTree:
    table = d["nodes"]
    built = [None] * len(table)
    for k in range(len(table) - 1, -1, -1):
        entry = table[k]
        if entry["type"] == "leaf":
            built[k] = Leaf(np.array(entry["distribution"], dtype=float), int(entry["class"]))
        else:
            built[k] = Internal(_decode_rule(entry), built[entry["left"]], built[entry["right"]])
    return TrainedTree(built[0], n_features, n_classes, int(d["node_count"]), int(d["depth"]),
                       d.get("seed", ""), int(d.get("fallback_count", 0)))


def forest_to_document(forest: Forest) -> dict:
    cfg = forest.config
    return {
        "format_version": FORMAT_VERSION,
        "variant": cfg.tree_config.variant,
        "config": {"n_trees": cfg.n_trees, "master_seed": cfg.master_seed,
                   "tree": asdict(cfg.tree_config)},
        "n_features": forest.n_features,
        "n_classes": forest.n_classes,
        "label_mapping": list(forest.class_names),
        "feature_names": list(forest.feature_names),
        "trees": [_encode_tree(t) for t in forest.trees],
    }


def forest_from_document(doc: dict) -> Forest:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    try:
        if doc.get("format_version") != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported format_version {doc.get('format_version')!r}")
        cfg = doc["config"]
        config = ForestConfig(TreeConfig(**cfg["tree"]), int(cfg["n_trees"]), int(cfg["master_seed"]))
        n, C = int(doc["n_features"]), int(doc["n_classes"])
        trees = [_decode_tree(t, n, C) for t in doc["trees"]]
        forest = Forest(trees, config, list(doc["label_mapping"]), list(doc["feature_names"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc
    if len(forest.trees) != config.n_trees or forest.n_features != n or forest.n_classes != C:
        raise ModelFormatError("model document is internally inconsistent")
    return forest


def dumps_forest(forest: Forest) -> str:
    return json.dumps(forest_to_document(forest), separators=(",", ":")) + "\n"


def save_forest(forest: Forest, path):
    Path(path).write_text(dumps_forest(forest), encoding="utf-8")


def load_forest(path) -> Forest:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a JSON document ({exc})") from exc
    return forest_from_document(doc)
