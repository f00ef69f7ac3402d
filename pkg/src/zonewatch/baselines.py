"""Comparison detectors: Isolation Forest and Local Outlier Factor.

Both are implemented directly (random partition trees, reachability
densities) and wear the same estimator API as the autoencoder detector so
the evaluation harness can swap them freely. Scores are oriented so that
higher means more anomalous.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .base import BaseEstimator, check_is_fitted
from .errors import ValidationError
from .rng import Rng
from .validation import check_array

__all__ = ["harmonic_number", "c_factor", "IsolationForestDetector",
           "LocalOutlierFactorDetector", "REACHABILITY_FLOOR"]

REACHABILITY_FLOOR = 1e-12

_HARMONICS = [0.0]  # H(0) = 0; extended on demand


def harmonic_number(k: int) -> float:
    """Exact partial sum H(k) = 1 + 1/2 + ... + 1/k."""
    if k < 0:
        raise ValidationError(f"harmonic number undefined for k={k}")
    while len(_HARMONICS) <= k:
        _HARMONICS.append(_HARMONICS[-1] + 1.0 / len(_HARMONICS))
    return _HARMONICS[k]


def c_factor(n: int) -> float:
    """Expected unsuccessful-search path length in a random binary tree of
    n points: 2H(n-1) - 2(n-1)/n. c(1) = 0, c(2) = 1."""
    if n <= 1:
        return 0.0
    return 2.0 * harmonic_number(n - 1) - 2.0 * (n - 1) / n


class _IsoNode:
    __slots__ = ("feature", "split", "left", "right", "size")

    def __init__(self, size, feature=None, split=None, left=None, right=None):
        self.size = size
        self.feature = feature
        self.split = split
        self.left = left
        self.right = right

    @property
    def is_leaf(self):
        return self.left is None


def _build_tree(X: np.ndarray, depth: int, cap: int, rng: Rng) -> _IsoNode:
    n = len(X)
    if n <= 1 or depth >= cap:
        return _IsoNode(n)
    feature = int(rng.integers(0, X.shape[1]))
    col = X[:, feature]
    lo, hi = col.min(), col.max()
    if lo == hi:
        return _IsoNode(n)
    split = float(rng.uniform(lo, hi))
    mask = col < split
    return _IsoNode(
        n, feature, split,
        _build_tree(X[mask], depth + 1, cap, rng),
        _build_tree(X[~mask], depth + 1, cap, rng),
    )


def _path_length(node: _IsoNode, x: np.ndarray) -> float:
    depth = 0
    while not node.is_leaf:
        node = node.left if x[node.feature] < node.split else node.right
        depth += 1
    return depth + c_factor(node.size)


def _tree_depth(node: _IsoNode) -> int:
    if node.is_leaf:
        return 0
    return 1 + max(_tree_depth(node.left), _tree_depth(node.right))


class IsolationForestDetector(BaseEstimator):
    """Random partition forest; score = 2^(-E[h(x)] / c(sample size))."""

    def __init__(self, tree_count=100, subsample_size=256, seed=0):
        self.tree_count = tree_count
        self.subsample_size = subsample_size
        self.seed = seed
        self.trees_ = None
        self.trained_size_ = None
        self.depth_cap_ = None
        self.c_norm_ = None

    def fit(self, X, y=None) -> "IsolationForestDetector":
        X = check_array(X)
        n = len(X)
        if self.subsample_size < 2:
            raise ValidationError("subsample_size must be >= 2")
        if self.subsample_size > n:
            raise ValidationError(
                f"subsample_size {self.subsample_size} exceeds data size {n}"
            )
        rng = Rng(self.seed)
        self.depth_cap_ = int(np.ceil(np.log2(self.subsample_size)))
        self.trees_ = []
        for _ in range(self.tree_count):
            idx = rng.choice(n, size=self.subsample_size, replace=False)
            self.trees_.append(_build_tree(X[idx], 0, self.depth_cap_, rng))
        self.trained_size_ = n
        self.c_norm_ = c_factor(self.subsample_size)
        return self

    def average_path_length(self, x) -> float:
        check_is_fitted(self, "trees_")
        x = np.asarray(x, dtype=np.float64)
        return float(np.mean([_path_length(t, x) for t in self.trees_]))

    def score_samples(self, X) -> np.ndarray:
        check_is_fitted(self, "trees_")
        X = check_array(X)
        return np.array(
            [2.0 ** (-self.average_path_length(x) / self.c_norm_) for x in X]
        )

    def predict(self, X, threshold=0.5) -> np.ndarray:
        return (self.score_samples(X) > threshold).astype(np.int64)

    def max_tree_depth(self) -> int:
        check_is_fitted(self, "trees_")
        return max(_tree_depth(t) for t in self.trees_)


class LocalOutlierFactorDetector(BaseEstimator):
    """Standard LOF: ratio of neighbours' local reachability density to the
    query point's own. Reachability distances are floored so duplicate-heavy
    neighbourhoods stay finite."""

    def __init__(self, k=20):
        self.k = k
        self.X_ = None
        self.k_distances_ = None
        self.lrd_ = None

    def fit(self, X, y=None) -> "LocalOutlierFactorDetector":
        X = check_array(X)
        n = len(X)
        if not 1 <= self.k < n:
            raise ValidationError(f"k must satisfy 1 <= k < n, got k={self.k}, n={n}")
        self.X_ = X
        dists = cdist(X, X)
        np.fill_diagonal(dists, np.inf)  # a training point is not its own neighbour
        order = np.argsort(dists, axis=1)[:, :self.k]
        knn_d = np.take_along_axis(dists, order, axis=1)
        self.k_distances_ = knn_d[:, -1]
        reach = np.maximum(knn_d, self.k_distances_[order])
        reach = np.maximum(reach, REACHABILITY_FLOOR)
        self.lrd_ = self.k / reach.sum(axis=1)
        self._neighbors = order
        return self

    def score_samples(self, X) -> np.ndarray:
        check_is_fitted(self, "lrd_")
        X = check_array(X)
        out = np.empty(len(X))
        for i in range(0, len(X), 512):
            chunk = X[i:i + 512]
            d = cdist(chunk, self.X_)
            order = np.argsort(d, axis=1)[:, :self.k]
            knn_d = np.take_along_axis(d, order, axis=1)
            reach = np.maximum(knn_d, self.k_distances_[order])
            reach = np.maximum(reach, REACHABILITY_FLOOR)
            lrd_x = self.k / reach.sum(axis=1)
            out[i:i + 512] = self.lrd_[order].mean(axis=1) / lrd_x
        return out

    def predict(self, X, threshold=1.5) -> np.ndarray:
        return (self.score_samples(X) > threshold).astype(np.int64)
