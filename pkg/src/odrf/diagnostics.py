"""Ensemble analysis: kappa-error diagrams, 0-1 bias/variance, tree sizes."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .data import Dataset, bootstrap
from .forest import Forest, ForestConfig, predict_forest_batch, train_forest, tree_predictions


class CoincidencePoint(NamedTuple):
    tree_i: int
    tree_j: int
    kappa: float
    avg_error: float


@dataclass(frozen=True)
class KappaErrorDiagram:
    points: list[CoincidencePoint]
    centroid: tuple[float, float]  # (mean kappa, mean averaged error)


@dataclass(frozen=True)
class BiasVarianceReport:
    bias_sq: float
    variance: float
    error: float
    repeats: int


@dataclass(frozen=True)
class NodeProfile:
    node_counts: list[int]
    mean: float
    min: int
    max: int
    mean_depth: float
    max_depth: int


def coincidence_matrix(pred_i, pred_j, n_classes) -> np.ndarray:
    pred_i, pred_j = np.asarray(pred_i), np.asarray(pred_j)
    if pred_i.shape != pred_j.shape:
        raise ValueError("prediction vectors differ in length")
    if pred_i.size == 0:
        raise ValueError("empty prediction vectors")
    M = np.zeros((n_classes, n_classes))
    np.add.at(M, (pred_i, pred_j), 1.0)
    return M / pred_i.size


def kappa_from_coincidence(M) -> float:
    M = np.asarray(M, dtype=float)
    observed = float(np.trace(M))
    chance = float(M.sum(axis=1) @ M.sum(axis=0))
    if np.isclose(observed, 1.0, rtol=0, atol=1e-12):
        # complete agreement, including two identical constant classifiers
        return 1.0
    return (observed - chance) / (1.0 - chance)


def kappa(pred_i, pred_j, n_classes) -> float:
    """Chance-corrected agreement between two classifiers' predictions."""
    return kappa_from_coincidence(coincidence_matrix(pred_i, pred_j, n_classes))


def kappa_error_diagram(forest: Forest, dataset: Dataset) -> KappaErrorDiagram:
    """One point per unordered tree pair, plus the centroid of all points."""
    L = len(forest.trees)
    if L < 2:
        raise ValueError("a kappa-error diagram needs at least two trees")
    preds = tree_predictions(forest, dataset.samples)
    errors = np.mean(preds != dataset.labels[None, :], axis=1)
    points = [
        CoincidencePoint(i, j, kappa(preds[i], preds[j], forest.n_classes),
                         float((errors[i] + errors[j]) / 2))
        for i, j in combinations(range(L), 2)
    ]
    centroid = (float(np.mean([p.kappa for p in points])), float(np.mean([p.avg_error for p in points])))
    return KappaErrorDiagram(points, centroid)


def format_kappa_csv(diagram: KappaErrorDiagram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tree_i", "tree_j", "kappa", "avg_error"])
    for p in diagram.points:
        w.writerow([p.tree_i, p.tree_j, repr(p.kappa), repr(p.avg_error)])
    w.writerow(["centroid", "", repr(diagram.centroid[0]), repr(diagram.centroid[1])])
    return buf.getvalue()


def parse_kappa_csv(text: str) -> KappaErrorDiagram:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["tree_i", "tree_j", "kappa", "avg_error"]:
        raise ValueError("not a kappa-error file")
    points, centroid = [], None
    for r in rows[1:]:
        if r[0] == "centroid":
            centroid = (float(r[2]), float(r[3]))
        else:
            points.append(CoincidencePoint(int(r[0]), int(r[1]), float(r[2]), float(r[3])))
    if centroid is None:
        raise ValueError("kappa-error file has no centroid row")
    return KappaErrorDiagram(points, centroid)


def bias_variance_terms(predictions, y_true, n_classes) -> tuple[np.ndarray, np.ndarray]:
    """Per-point squared bias and variance under 0-1 loss.

    Args:
        predictions: (T, M) class predictions of T models on M test points.
        y_true: (M,) observed labels; the target distribution is a point mass
            on them, so label noise is absorbed into the bias term.

    Returns:
        ``(bias_sq, variance)``, each of shape (M,).
    """
    predictions = np.asarray(predictions)
    y_true = np.asarray(y_true)
    T, M = predictions.shape
    if y_true.shape != (M,):
        raise ValueError("label vector does not match predictions")
    p_model = np.zeros((M, n_classes))
    for row in predictions:
        p_model[np.arange(M), row] += 1.0
    p_model /= T
    p_target = np.eye(n_classes)[y_true]
    bias_sq = 0.5 * np.sum((p_target - p_model) ** 2, axis=1)
    variance = 0.5 * (1.0 - np.sum(p_model ** 2, axis=1))
    return bias_sq, variance


def bias_variance_from_predictions(predictions, y_true, n_classes) -> BiasVarianceReport:
    predictions = np.asarray(predictions)
    b, v = bias_variance_terms(predictions, y_true, n_classes)
    err = float(np.mean(predictions != np.asarray(y_true)[None, :]))
    return BiasVarianceReport(float(b.mean()), float(v.mean()), err, predictions.shape[0])


def bias_variance(train: Dataset, test: Dataset, config: ForestConfig, repeats: int = 10,
                  seed: int = 0, workers: int | None = None) -> BiasVarianceReport:
    """Train ``repeats`` forests on bootstrap replicates of ``train`` and decompose test error.

    Replicate t uses rows drawn with replacement from ``train`` and a forest
    seeded with ``config.master_seed + t``.
    """
    if repeats < 2:
        raise ValueError("bias/variance estimation needs at least two repeats")
    if test.n_samples < 1:
        raise ValueError("empty test set")
    if test.n_features != train.n_features:
        raise ValueError("train and test feature counts differ")
    rng = np.random.default_rng(seed)
    preds = []
    for t in range(repeats):
        rows = bootstrap(np.arange(train.n_samples), rng)
        forest = train_forest(train.subset(rows), replace(config, master_seed=config.master_seed + t), workers)
        preds.append(predict_forest_batch(forest, test.samples))
    return bias_variance_from_predictions(np.stack(preds), test.labels, train.n_classes)


def format_bias_variance(report: BiasVarianceReport) -> str:
    return (f"bias_sq={report.bias_sq!r}\nvariance={report.variance!r}\n"
            f"error={report.error!r}\nrepeats={report.repeats}\n")


def parse_bias_variance(text: str) -> BiasVarianceReport:
    kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
    return BiasVarianceReport(float(kv["bias_sq"]), float(kv["variance"]), float(kv["error"]),
                              int(kv["repeats"]))


def node_profile(forest: Forest) -> NodeProfile:
    counts = [t.node_count for t in forest.trees]
    depths = [t.depth for t in forest.trees]
    return NodeProfile(counts, float(np.mean(counts)), int(min(counts)), int(max(counts)),
                       float(np.mean(depths)), int(max(depths)))


def format_node_profile(profile: NodeProfile, label: str = "") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "mean_nodes", "min_nodes", "max_nodes", "mean_depth", "max_depth"])
    w.writerow([label, repr(profile.mean), profile.min, profile.max, repr(profile.mean_depth),
                profile.max_depth])
    return buf.getvalue()
