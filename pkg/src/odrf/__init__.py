"""Oblique and rotation double random forests."""

from .data import Dataset, DataError, load_dataset, save_dataset, train_test_split
from .forest import (
    Forest,
    ForestConfig,
    evaluate,
    load_forest,
    predict_forest,
    predict_forest_batch,
    save_forest,
    train_forest,
)
from .tree import VARIANT_PAIRS, VARIANTS, TreeConfig, grow_tree, predict_tree

__all__ = [
    "Dataset", "DataError", "load_dataset", "save_dataset", "train_test_split",
    "Forest", "ForestConfig", "evaluate", "load_forest", "predict_forest",
    "predict_forest_batch", "save_forest", "train_forest",
    "VARIANTS", "VARIANT_PAIRS", "TreeConfig", "grow_tree", "predict_tree",
]
