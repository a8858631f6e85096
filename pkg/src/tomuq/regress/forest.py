"""Regression trees and bagged forests built from scratch.

Trees grow greedily on squared-error reduction, considering every feature
at every node with candidate thresholds at midpoints between consecutive
distinct sorted values.  Forests bootstrap-resample the training set
(with replacement, same size) for each tree; per-tree generators derive
from (seed, tree index), so fitting is order-independent and fully
reproducible.  Predictions are the arithmetic mean of the trees.
"""

from __future__ import annotations

import numpy as np

from tomuq.errors import FitError

DEFAULT_N_TREES = 100
DEFAULT_MAX_DEPTH = 5
_MIN_SAMPLES_SPLIT = 2


def _best_split(X: np.ndarray, y: np.ndarray) -> tuple[int, float] | None:
    """Feature index and threshold with the lowest post-split SSE, or None."""
    n = y.size
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]  # (n, d): column j holds y sorted by feature j
    csum = np.cumsum(ys, axis=0)
    csum_sq = np.cumsum(ys * ys, axis=0)
    total = csum[-1, 0]
    total_sq = csum_sq[-1, 0]
    parent_sse = total_sq - total * total / n

    left_n = np.arange(1, n, dtype=np.float64)[:, None]
    right_n = n - left_n
    left_sse = csum_sq[:-1] - csum[:-1] ** 2 / left_n
    right_sse = (total_sq - csum_sq[:-1]) - (total - csum[:-1]) ** 2 / right_n
    split_sse = left_sse + right_sse
    split_sse[xs[1:] <= xs[:-1]] = np.inf  # no threshold between equal values

    flat = np.argmin(split_sse)
    i, j = np.unravel_index(flat, split_sse.shape)
    best = split_sse[i, j]
    if not np.isfinite(best) or best >= parent_sse - 1e-12:
        return None
    threshold = (xs[i, j] + xs[i + 1, j]) / 2.0
    return int(j), float(threshold)


def _grow(X: np.ndarray, y: np.ndarray, depth: int, max_depth: int) -> dict:
    if (
        depth >= max_depth
        or y.size < _MIN_SAMPLES_SPLIT
        or np.ptp(y) == 0.0
    ):
        return {"value": float(np.mean(y))}
    split = _best_split(X, y)
    if split is None:
        return {"value": float(np.mean(y))}
    feature, threshold = split
    mask = X[:, feature] <= threshold
    return {
        "feature": feature,
        "threshold": threshold,
        "left": _grow(X[mask], y[mask], depth + 1, max_depth),
        "right": _grow(X[~mask], y[~mask], depth + 1, max_depth),
    }


def tree_predict(node: dict, X: np.ndarray) -> np.ndarray:
    """Evaluate one tree on a (n, d) matrix."""
    out = np.empty(X.shape[0], dtype=np.float64)
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        current, idx = stack.pop()
        if idx.size == 0:
            continue
        if "value" in current:
            out[idx] = current["value"]
            continue
        mask = X[idx, current["feature"]] <= current["threshold"]
        stack.append((current["left"], idx[mask]))
        stack.append((current["right"], idx[~mask]))
    return out


def tree_depth(node: dict) -> int:
    if "value" in node:
        return 0
    return 1 + max(tree_depth(node["left"]), tree_depth(node["right"]))


def tree_leaf_count(node: dict) -> int:
    if "value" in node:
        return 1
    return tree_leaf_count(node["left"]) + tree_leaf_count(node["right"])


class RandomForestRegressor:
    """Bagged regression trees with deterministic per-tree seeding."""

    def __init__(
        self,
        n_trees: int = DEFAULT_N_TREES,
        max_depth: int = DEFAULT_MAX_DEPTH,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.seed = seed
        self.trees: list[dict] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForestRegressor":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
            raise FitError(f"bad training shapes {X.shape} / {y.shape}")
        if y.size < 2:
            raise FitError("need at least two training rows")
        n = y.size
        self.trees = []
        for t in range(self.n_trees):
            rng = np.random.default_rng([self.seed, t])
            idx = rng.integers(0, n, size=n)
            self.trees.append(_grow(X[idx], y[idx], 0, self.max_depth))
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if not self.trees:
            raise FitError("forest is not fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        per_tree = np.stack([tree_predict(t, X) for t in self.trees])
        return per_tree.mean(axis=0)
