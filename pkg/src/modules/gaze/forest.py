# src/modules/gaze/forest.py

import logging
import time
from typing import List, Sequence

import numpy as np
import sklearn
from sklearn.tree import DecisionTreeClassifier

from src.core.errors import TrainingError
from src.utils import format_duration
from .models import (
    FEATURE_COUNT,
    LEAF,
    DecisionTreeModel,
    FeatureVector,
    ForestHyperParams,
    ForestModel,
)

logger = logging.getLogger(__name__)

MAX_BOOTSTRAP_DRAWS = 100


def _bootstrap(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Bootstrap indices; redrawn until both classes are present."""
    n = y.size
    for _ in range(MAX_BOOTSTRAP_DRAWS):
        idx = rng.integers(0, n, size=n)
        if y[idx].min() != y[idx].max():
            return idx
    # Degenerate tiny sets: force one row of each class into the sample.
    idx[0] = int(np.flatnonzero(y == 0)[0])
    idx[-1] = int(np.flatnonzero(y == 1)[0])
    return idx


def export_tree(estimator: DecisionTreeClassifier) -> DecisionTreeModel:
    """Copies a fitted sklearn tree into the serializable flat-array form."""
    tree = estimator.tree_
    is_leaf = tree.children_left == -1
    value = tree.value[:, 0, :]
    totals = value.sum(axis=1)
    positive_col = list(estimator.classes_).index(1)
    posterior = np.clip(value[:, positive_col] / totals, 0.0, 1.0)
    return DecisionTreeModel(
        feature_index=np.where(is_leaf, LEAF, tree.feature).astype(int).tolist(),
        threshold=np.where(is_leaf, 0.0, tree.threshold).astype(float).tolist(),
        left=np.where(is_leaf, LEAF, tree.children_left).astype(int).tolist(),
        right=np.where(is_leaf, LEAF, tree.children_right).astype(int).tolist(),
        leaf_posterior=posterior.astype(float).tolist(),
    )


def train_forest(features: np.ndarray, labels: np.ndarray, hyper: ForestHyperParams) -> ForestModel:
    """
    Grows hyper.trees Gini trees, each on a bootstrap resample and considering
    hyper.features_per_split features per node.
    """
    x = np.asarray(features, dtype=np.float64).reshape(-1, FEATURE_COUNT)
    y = np.asarray(labels).astype(int).reshape(-1)
    if x.shape[0] != y.size:
        raise TrainingError(f"{x.shape[0]} feature rows but {y.size} labels")
    positives = int((y == 1).sum())
    if positives == 0 or positives == y.size:
        raise TrainingError(
            f"Training data holds a single class ({positives} positive of {y.size} rows); "
            "need at least one positive and one negative row"
        )

    start = time.monotonic()
    rng = np.random.default_rng(hyper.seed)
    trees: List[DecisionTreeModel] = []
    for _ in range(hyper.trees):
        idx = _bootstrap(y, rng)
        estimator = DecisionTreeClassifier(
            criterion="gini",
            max_depth=hyper.max_depth,
            min_samples_leaf=hyper.min_leaf,
            max_features=hyper.features_per_split,
            random_state=int(rng.integers(0, 2**31 - 1)),
        )
        estimator.fit(x[idx], y[idx])
        trees.append(export_tree(estimator))

    logger.info(
        f"Trained {hyper.trees} trees on {y.size} rows ({positives} positive) "
        f"in {format_duration(time.monotonic() - start)}"
    )
    return ForestModel(
        tree_count=len(trees),
        trees=trees,
        metadata={
            "hyper": hyper.model_dump(),
            "rows": int(y.size),
            "positives": positives,
            "sklearn": sklearn.__version__,
        },
    )


def forest_posterior(m: ForestModel, f: FeatureVector) -> float:
    """Mean of the per-tree leaf posteriors for one candidate."""
    return float(m.posteriors(f.as_array()[None, :])[0])


def forest_posteriors(m: ForestModel, features: Sequence[FeatureVector]) -> np.ndarray:
    return m.posteriors(np.stack([f.as_array() for f in features]))
