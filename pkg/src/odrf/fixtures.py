"""Small benchmark datasets.

Three classic tables ship as CSV files; the rest are synthetic and generated
deterministically from a fixed seed. ``python -m odrf.fixtures OUTDIR`` writes
all of them to disk, together with 70/30 train/test splits and a benchmark
manifest.
"""

from __future__ import annotations

import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .data import Dataset, load_dataset, save_dataset, train_test_split

BUNDLED = ("iris", "wine", "breast_cancer")
SYNTHETIC = ("rotated_gaussians", "blobs", "xor", "sep")
FIXTURES = BUNDLED + SYNTHETIC


def rotated_gaussians(n=400, d=6, seed=7, along=3.0, across=0.4, sep=1.5) -> Dataset:
    """Two elongated Gaussians whose separating direction is a random rotation.

    Axis-aligned splits need many steps to follow the boundary; one oblique
    cut captures it.
    """
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    y = np.repeat([0, 1], n // 2)
    Z = rng.normal(size=(y.size, d)) * np.r_[across, [along] * (d - 1)]
    Z[:, 0] += np.where(y == 0, -sep / 2, sep / 2)
    return Dataset(Z @ Q.T, y, 2, class_names=["a", "b"])


def blobs(n=500, d=6, n_classes=5, seed=11, spread=1.0, scale=2.5) -> Dataset:
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=scale, size=(n_classes, d))
    y = np.arange(n) % n_classes
    X = centers[y] + rng.normal(scale=spread, size=(n, d))
    return Dataset(X, y, n_classes, class_names=[f"c{k}" for k in range(n_classes)])


def xor(n=400, seed=3, noise=0.15) -> Dataset:
    """Four clusters on the corners of a square, opposite corners share a class."""
    rng = np.random.default_rng(seed)
    corners = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    idx = np.arange(n) % 4
    X = corners[idx] + rng.normal(scale=noise, size=(n, 2))
    return Dataset(X, (idx >= 2).astype(np.int64), 2, class_names=["same", "diff"])


def sep(n=200, d=2, seed=5, margin=0.5) -> Dataset:
    """Linearly separable two-class set with a guaranteed gap around the plane."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    w /= np.linalg.norm(w)
    X = rng.uniform(-3, 3, size=(4 * n, d))
    s = X @ w
    X = X[np.abs(s) > margin][:n]
    y = (X @ w > 0).astype(np.int64)
    return Dataset(X, y, 2, class_names=["neg", "pos"])


_GENERATORS = {"rotated_gaussians": rotated_gaussians, "blobs": blobs, "xor": xor, "sep": sep}


def load_fixture(name: str) -> Dataset:
    if name in BUNDLED:
        with resources.as_file(resources.files("odrf") / "datasets" / f"{name}.csv") as path:
            return load_dataset(path)
    if name in _GENERATORS:
        return _GENERATORS[name]()
    raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")


def majority_baseline(dataset: Dataset) -> float:
    return float(np.bincount(dataset.labels, minlength=dataset.n_classes).max() / dataset.n_samples)


def write_fixtures(out_dir, test_fraction=0.3, seed=0, variants=None) -> Path:
    """Write every fixture plus train/test splits and a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in FIXTURES:
        ds = load_fixture(name)
        save_dataset(ds, out / f"{name}.csv")
        train, test = train_test_split(ds, test_fraction, seed)
        save_dataset(train, out / f"{name}_train.csv")
        save_dataset(test, out / f"{name}_test.csv")
        entries.append({"name": name, "train": f"{name}_train.csv", "test": f"{name}_test.csv"})
    manifest = {"datasets": entries, "config": {"trees": 50, "seed": 0}, "output_dir": "benchmark_out"}
    if variants is not None:
        manifest["variants"] = list(variants)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit("usage: python -m odrf.fixtures OUTDIR")
    print(write_fixtures(sys.argv[1]))
