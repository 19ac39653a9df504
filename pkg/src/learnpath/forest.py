"""Decision trees and random forests built from scratch on numpy.

Axis-aligned binary trees with midpoint thresholds. Classification trees
split on Gini impurity and keep a class distribution at each leaf;
regression trees split on squared-error reduction and keep the mean. The
forest bags bootstrap resamples and sqrt(d) feature subsets per split, both
of which can be switched off to reduce the ensemble to a single plain tree.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np


class TooFewRows(ValueError):
    pass


class MixedLabelTypes(ValueError):
    pass


@dataclass(frozen=True)
class ForestConfig:
    task: str = "classify"  # "classify" or "regress"
    n_trees: int = 100
    max_depth: int = 10
    min_leaf: int = 2
    bootstrap: bool = True
    feature_subsample: bool = True  # sqrt(d) features per split when True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.task not in ("classify", "regress"):
            raise ValueError(f"unknown task: {self.task}")
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("n_trees, max_depth and min_leaf must be >= 1")


def _gini(y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    p1 = float(np.mean(y))
    return 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)


def _sse(y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    return float(np.sum((y - y.mean()) ** 2))


def _node_impurity(y: np.ndarray, task: str) -> float:
    return _gini(y) * len(y) if task == "classify" else _sse(y)


def _best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray,
                min_leaf: int, task: str) -> Optional[tuple[int, float, float]]:
    """Best (feature, threshold, child_impurity) or None when nothing splits."""
    parent = _node_impurity(y, task)
    best: Optional[tuple[int, float, float]] = None
    for f in features:
        col = X[:, f]
        values = np.unique(col)
        if len(values) < 2:
            continue
        for lo, hi in zip(values[:-1], values[1:]):
            threshold = (lo + hi) / 2.0
            mask = col <= threshold
            nl = int(mask.sum())
            if nl < min_leaf or len(y) - nl < min_leaf:
                continue
            impurity = _node_impurity(y[mask], task) + _node_impurity(y[~mask], task)
            if impurity >= parent - 1e-12:
                continue
            if best is None or impurity < best[2] - 1e-12:
                best = (int(f), float(threshold), impurity)
    return best


def _leaf(y: np.ndarray, task: str) -> dict:
    if task == "classify":
        p1 = float(np.mean(y))
        return {"leaf": [1.0 - p1, p1]}
    return {"leaf": float(np.mean(y))}


def _grow(X: np.ndarray, y: np.ndarray, depth: int, config: ForestConfig,
          rng: Optional[np.random.Generator]) -> dict:
    if depth >= config.max_depth or len(y) < 2 * config.min_leaf:
        return _leaf(y, config.task)
    if config.task == "classify" and (np.all(y == y[0])):
        return _leaf(y, config.task)
    d = X.shape[1]
    if config.feature_subsample and rng is not None:
        n_feat = max(1, int(math.isqrt(d)))
        features = np.sort(rng.choice(d, size=n_feat, replace=False))
    else:
        features = np.arange(d)
    split = _best_split(X, y, features, config.min_leaf, config.task)
    if split is None:
        return _leaf(y, config.task)
    f, threshold, _ = split
    mask = X[:, f] <= threshold
    return {
        "f": f,
        "t": threshold,
        "l": _grow(X[mask], y[mask], depth + 1, config, rng),
        "r": _grow(X[~mask], y[~mask], depth + 1, config, rng),
    }


def _walk(node: dict, x: np.ndarray):
    while "leaf" not in node:
        node = node["l"] if x[node["f"]] <= node["t"] else node["r"]
    return node["leaf"]


class DecisionTree:
    """Single tree; deterministic when feature subsampling is off."""

    def __init__(self, root: dict, task: str) -> None:
        self.root = root
        self.task = task

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, config: ForestConfig,
            rng: Optional[np.random.Generator] = None) -> "DecisionTree":
        return cls(_grow(X, y, 0, config, rng), config.task)

    def predict_p(self, x: np.ndarray) -> float:
        """Probability of the positive class at the matching leaf."""
        return float(_walk(self.root, x)[1])

    def predict_value(self, x: np.ndarray) -> float:
        return float(_walk(self.root, x))


class ForestModel:
    """Bagged ensemble; predictions average the member trees."""

    def __init__(self, trees: list[DecisionTree], config: ForestConfig,
                 n_features: int) -> None:
        self.trees = trees
        self.config = config
        self.n_features = n_features

    def predict_p(self, x) -> float:
        x = np.asarray(x, dtype=float)
        self._check(x)
        return float(np.mean([t.predict_p(x) for t in self.trees]))

    def predict_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        self._check(x)
        return float(np.mean([t.predict_value(x) for t in self.trees]))

    def predict_label(self, x) -> int:
        return int(self.predict_p(x) >= 0.5)

    def _check(self, x: np.ndarray) -> None:
        if x.shape != (self.n_features,):
            raise ValueError(
                f"expected {self.n_features} features, got {x.shape}")


def _validate_labels(y: np.ndarray, task: str) -> np.ndarray:
    if task == "classify":
        values = set(np.unique(y).tolist())
        if not values <= {0, 1, 0.0, 1.0, True, False}:
            raise MixedLabelTypes(f"classifier labels must be 0/1, got {sorted(values)}")
        return y.astype(float)
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise MixedLabelTypes("regressor targets must be finite and non-negative")
    return y.astype(float)


def train_forest(X, y, config: ForestConfig = ForestConfig()) -> ForestModel:
    """Fit a forest; deterministic for a fixed config seed.

    Args:
        X: feature matrix, one row per example.
        y: binary labels (classify) or non-negative targets (regress).
        config: ensemble and tree hyperparameters.
    """
    X = np.asarray(X, dtype=float)
    y = _validate_labels(np.asarray(y), config.task)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one label per row")
    if len(y) < 2:
        raise TooFewRows(f"need at least 2 rows, got {len(y)}")
    trees: list[DecisionTree] = []
    seqs = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    for seq in seqs:
        rng = np.random.default_rng(seq)
        if config.bootstrap:
            idx = rng.integers(0, len(y), size=len(y))
            Xb, yb = X[idx], y[idx]
        else:
            Xb, yb = X, y
        trees.append(DecisionTree.fit(Xb, yb, config, rng))
    return ForestModel(trees, config, X.shape[1])


def save_forest(model: ForestModel, path: str | Path) -> None:
    """Persist the fitted ensemble as JSON; floats round-trip bitwise."""
    payload = {
        "task": model.config.task,
        "n_trees": model.config.n_trees,
        "max_depth": model.config.max_depth,
        "min_leaf": model.config.min_leaf,
        "bootstrap": model.config.bootstrap,
        "feature_subsample": model.config.feature_subsample,
        "seed": model.config.seed,
        "n_features": model.n_features,
        "trees": [t.root for t in model.trees],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_forest(path: str | Path) -> ForestModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    config = ForestConfig(
        task=payload["task"], n_trees=payload["n_trees"],
        max_depth=payload["max_depth"], min_leaf=payload["min_leaf"],
        bootstrap=payload["bootstrap"],
        feature_subsample=payload["feature_subsample"], seed=payload["seed"])
    trees = [DecisionTree(root, config.task) for root in payload["trees"]]
    return ForestModel(trees, config, payload["n_features"])
