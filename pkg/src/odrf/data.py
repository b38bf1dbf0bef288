"""Dataset ingestion, bootstrap resampling and feature-subspace sampling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised when a data file cannot be turned into a valid Dataset."""


@dataclass(frozen=True)
class Dataset:
    """Numeric sample matrix with integer class labels.

    Attributes:
        samples: (N, n) float array of feature values.
        labels: (N,) int array with values in ``[0, n_classes)``.
        n_classes: Number of classes known to the label mapping. A subsample
            may be missing some of them.
        feature_names: Column names of ``samples``.
        class_names: Label mapping, ``class_names[k]`` is the name of class k.
    """

    samples: np.ndarray
    labels: np.ndarray
    n_classes: int
    feature_names: list[str] = field(default_factory=list)
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        X = np.ascontiguousarray(self.samples, dtype=float)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"samples must be a non-empty 2-D array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError("labels length does not match number of samples")
        if not np.all(np.isfinite(X)):
            raise DataError("samples contain non-finite values")
        if self.n_classes < 1 or y.min() < 0 or y.max() >= self.n_classes:
            raise DataError("labels must lie in [0, n_classes)")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "samples", X)
        object.__setattr__(self, "labels", y)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", [f"x{j}" for j in range(X.shape[1])])
        if not self.class_names:
            object.__setattr__(self, "class_names", [str(k) for k in range(self.n_classes)])
        if len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length does not match number of features")
        if len(self.class_names) != self.n_classes:
            raise DataError("class_names length does not match n_classes")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_features(self) -> int:
        return self.samples.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.samples[idx], self.labels[idx], self.n_classes,
                       list(self.feature_names), list(self.class_names))


def load_dataset(path, label_column="last", class_names=None) -> Dataset:
    """Read a comma-separated file with a header row into a Dataset.

    Args:
        path: CSV file path.
        label_column: Name of the label column, or ``"last"``.
        class_names: Fixed label mapping (e.g. taken from a training file or a
            saved model). Labels outside it are rejected. When omitted,
            classes are numbered in order of first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such data file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    if label_column == "last":
        label_idx = len(header) - 1
    else:
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header")
        label_idx = header.index(label_column)
    if len(header) < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")
    feat_idx = [j for j in range(len(header)) if j != label_idx]

    mapping = {name: k for k, name in enumerate(class_names)} if class_names is not None else {}
    names = list(class_names) if class_names is not None else []
    X = np.empty((len(body), len(feat_idx)))
    y = np.empty(len(body), dtype=np.int64)
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
        for out_j, j in enumerate(feat_idx):
            cell = row[j].strip()
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                raise DataError(f"non-numeric feature cell at row {r}, column {j + 1}")
            X[r - 1, out_j] = value
        label = row[label_idx].strip()
        if label not in mapping:
            if class_names is not None:
                raise DataError(f"{path}: row {r} has label {label!r} unknown to the label mapping")
            mapping[label] = len(names)
            names.append(label)
        y[r - 1] = mapping[label]
    return Dataset(X, y, len(names), [header[j] for j in feat_idx], names)


def save_dataset(dataset: Dataset, path, label_name="label"):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*dataset.feature_names, label_name])
        for x, k in zip(dataset.samples, dataset.labels):
            w.writerow([repr(float(v)) for v in x] + [dataset.class_names[k]])


def bootstrap(source, rng: np.random.Generator) -> np.ndarray:
    """Resample ``source`` uniformly with replacement, keeping its size."""
    source = np.asarray(source, dtype=np.int64)
    if source.size == 0:
        raise ValueError("cannot bootstrap an empty index set")
    return source[rng.integers(0, source.size, size=source.size)]


def default_mtry(n_features: int) -> int:
    return max(1, int(round(math.sqrt(n_features))))


def sample_feature_subset(n_features: int, mtry: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``min(mtry, n_features)`` distinct column indices."""
    if n_features < 1 or mtry < 1:
        raise ValueError("n_features and mtry must be >= 1")
    k = min(mtry, n_features)
    return rng.choice(n_features, size=k, replace=False)


def tree_stream(master_seed: int, tree_index: int) -> np.random.Generator:
    """Generator for one tree, mixed from (master_seed, tree_index).

    Equal to the ``tree_index``-th child spawned from ``SeedSequence(master_seed)``,
    so it does not depend on how trees are scheduled across workers.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(tree_index),))
    return np.random.Generator(np.random.PCG64(ss))


def train_test_split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified holdout split; every class keeps at least one training row."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for k in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == k)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        n_test = int(round(test_fraction * idx.size))
        n_test = min(n_test, idx.size - 1)
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return dataset.subset(np.sort(train)), dataset.subset(np.sort(test))
