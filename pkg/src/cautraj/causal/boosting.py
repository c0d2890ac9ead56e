"""Squared-error gradient boosting over depth-limited regression trees.

Features are quantile-binned once per fit (at most ``max_bins`` bins per
feature); split search runs on per-node gradient histograms built by
:func:`cautraj.kernels.build_histogram`. Fitted trees are plain arrays so a
model round-trips through JSON without pickling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import InsufficientData, ModelNotFitted

MIN_SAMPLES = 20


@dataclass
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X):
        return kernels.apply_tree(X, self.feature, self.threshold, self.left, self.right, self.value)

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            feature=np.asarray(d["feature"], dtype=np.intp),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.intp),
            right=np.asarray(d["right"], dtype=np.intp),
            value=np.asarray(d["value"], dtype=np.float64),
        )


def bin_features(X, max_bins=255):
    """Return ``(binned, cuts)``; ``x <= cuts[j][k]`` iff ``binned[:, j] <= k``."""
    n, p = X.shape
    binned = np.empty((n, p), dtype=np.uint16)
    cuts = []
    for j in range(p):
        col = X[:, j]
        uniq = np.unique(col)
        if uniq.size <= max_bins:
            c = 0.5 * (uniq[:-1] + uniq[1:])
        else:
            qs = np.quantile(col, np.linspace(0, 1, max_bins + 1)[1:-1], method="lower")
            qs = np.unique(qs)
            # cut halfway to the next distinct value so ties stay together
            nxt = uniq[np.minimum(np.searchsorted(uniq, qs, side="right"), uniq.size - 1)]
            c = np.unique(0.5 * (qs + nxt))
            c = c[c < uniq[-1]]
        cuts.append(c)
        binned[:, j] = np.searchsorted(c, col, side="left")
    return binned, cuts


class GradientBoostingRegressor:
    """Least-squares boosting. Deterministic for a given ``random_state``.

    ``subsample < 1`` draws a row subset per round from ``random_state``;
    the default uses every row and involves no randomness.
    """

    def __init__(self, n_estimators=100, max_depth=3, learning_rate=0.1,
                 min_samples_leaf=5, max_bins=255, subsample=1.0, random_state=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_samples_leaf = min_samples_leaf
        self.max_bins = max_bins
        self.subsample = subsample
        self.random_state = random_state
        self.init_ = None
        self.trees_: list[Tree] = []

    def get_params(self):
        return {
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "min_samples_leaf": self.min_samples_leaf,
            "max_bins": self.max_bins,
            "subsample": self.subsample,
            "random_state": self.random_state,
        }

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        n = X.shape[0]
        if n < MIN_SAMPLES:
            raise InsufficientData(f"boosting needs at least {MIN_SAMPLES} rows, got {n}")
        if y.shape != (n,):
            raise ValueError("X and y have inconsistent lengths")
        binned, cuts = bin_features(X, self.max_bins)
        n_bins = max(len(c) for c in cuts) + 1
        n_cuts = np.array([len(c) for c in cuts])
        rng = np.random.default_rng(self.random_state)

        self.init_ = float(np.mean(y))
        pred = np.full(n, self.init_)
        self.trees_ = []
        all_rows = np.arange(n, dtype=np.intp)
        for _ in range(self.n_estimators):
            resid = y - pred
            if self.subsample < 1.0:
                m = max(MIN_SAMPLES, int(round(self.subsample * n)))
                rows = np.sort(rng.choice(n, size=m, replace=False)).astype(np.intp)
            else:
                rows = all_rows
            tree, leaf_of = self._grow(binned, cuts, n_cuts, n_bins, resid, rows)
            self.trees_.append(tree)
            if rows is all_rows:
                pred += tree.value[leaf_of]
            else:
                pred += tree.predict(X)
        return self

    def _grow(self, binned, cuts, n_cuts, n_bins, resid, rows):
        feature, threshold, left, right, value = [], [], [], [], []
        leaf_of = np.empty(binned.shape[0], dtype=np.intp)

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        stack = [(new_node(), rows, 0)]
        min_leaf = self.min_samples_leaf
        while stack:
            node, idx, depth = stack.pop()
            split = None
            if depth < self.max_depth and idx.size >= 2 * min_leaf:
                split = self._best_split(binned, n_cuts, n_bins, resid, idx)
            if split is None:
                value[node] = self.learning_rate * float(np.mean(resid[idx]))
                leaf_of[idx] = node
                continue
            f, k = split
            goes_left = binned[idx, f] <= k
            lnode, rnode = new_node(), new_node()
            feature[node] = f
            threshold[node] = float(cuts[f][k])
            left[node], right[node] = lnode, rnode
            # right pushed first so the left subtree gets lower node ids
            stack.append((rnode, idx[~goes_left], depth + 1))
            stack.append((lnode, idx[goes_left], depth + 1))
        tree = Tree(
            np.array(feature, dtype=np.intp),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.intp),
            np.array(right, dtype=np.intp),
            np.array(value, dtype=np.float64),
        )
        return tree, leaf_of

    def _best_split(self, binned, n_cuts, n_bins, resid, idx):
        gsum, count = kernels.build_histogram(binned, resid, idx, n_bins)
        gl = np.cumsum(gsum, axis=1)[:, :-1]
        nl = np.cumsum(count, axis=1)[:, :-1]
        g_tot = gsum.sum(axis=1, keepdims=True)
        n_tot = idx.size
        nr = n_tot - nl
        valid = (nl >= self.min_samples_leaf) & (nr >= self.min_samples_leaf)
        valid &= np.arange(n_bins - 1)[None, :] < n_cuts[:, None]
        if not valid.any():
            return None
        g_all = float(np.sum(resid[idx]))
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = gl * gl / nl + (g_tot - gl) ** 2 / nr - g_all * g_all / n_tot
        gain = np.where(valid, gain, -np.inf)
        best = int(np.argmax(gain))
        f, k = divmod(best, n_bins - 1)
        scale = max(g_all * g_all / n_tot, float(np.sum(resid[idx] ** 2)), 1e-300)
        if not gain[f, k] > 1e-12 * scale:
            return None
        return f, k

    def predict(self, X):
        if self.init_ is None:
            raise ModelNotFitted("call fit() first")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        out = np.full(X.shape[0], self.init_)
        for tree in self.trees_:
            out += tree.predict(X)
        return out

    def to_dict(self):
        if self.init_ is None:
            raise ModelNotFitted("call fit() first")
        return {"params": self.get_params(), "init": self.init_,
                "trees": [t.to_dict() for t in self.trees_]}

    @classmethod
    def from_dict(cls, d):
        model = cls(**d["params"])
        model.init_ = float(d["init"])
        model.trees_ = [Tree.from_dict(t) for t in d["trees"]]
        return model


def fit_boosted_trees(features, target, hyperparams=None):
    """Fit a :class:`GradientBoostingRegressor` with ``hyperparams`` overrides."""
    return GradientBoostingRegressor(**(hyperparams or {})).fit(features, target)
