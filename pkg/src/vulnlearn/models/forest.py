"""Random forest of Gini-split decision trees on bootstrap samples."""
from __future__ import annotations

import math

import numpy as np

from .base import ModelKind, TrainedModel, check_training_data, class_weights

_LEAF = -1


class _TreeBuilder:
    def __init__(self, X, y, w, max_features, max_depth, min_samples_split, rng):
        self.X, self.y, self.w = X, y, w
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.vote: list[int] = []

    def _new_node(self) -> int:
        for arr, v in ((self.feature, _LEAF), (self.threshold, 0.0), (self.left, _LEAF),
                       (self.right, _LEAF), (self.vote, 0)):
            arr.append(v)
        return len(self.feature) - 1

    def _best_split(self, idx, feats):
        Xn = self.X[np.ix_(idx, feats)]
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        wn = self.w[idx]
        wpos = (wn * self.y[idx])[order]
        wall = wn[order]
        left_pos = np.cumsum(wpos, axis=0)[:-1]
        left_all = np.cumsum(wall, axis=0)[:-1]
        tot_pos, tot_all = wpos[:, 0].sum(), wall[:, 0].sum()
        right_pos = tot_pos - left_pos
        right_all = tot_all - left_all
        with np.errstate(invalid="ignore", divide="ignore"):
            pl = left_pos / left_all
            pr = right_pos / right_all
            # weighted Gini impurity of the two children
            cost = left_all * 2 * pl * (1 - pl) + right_all * 2 * pr * (1 - pr)
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            return None
        cost = np.where(valid, cost, np.inf)
        flat = int(np.argmin(cost))          # first minimum in (row, feature) order
        row, col = divmod(flat, cost.shape[1])
        lo, hi = xs[row, col], xs[row + 1, col]
        thr = lo + (hi - lo) / 2.0
        if not lo <= thr < hi:
            thr = lo
        return feats[col], thr

    def build(self, idx: np.ndarray) -> None:
        stack = [(self._new_node(), idx, 0)]
        n_features = self.X.shape[1]
        while stack:
            node, idx, depth = stack.pop()
            wpos = float(np.sum(self.w[idx] * self.y[idx]))
            wall = float(np.sum(self.w[idx]))
            self.vote[node] = int(wpos >= 0.5 * wall)
            pure = wpos == 0.0 or wpos == wall
            if pure or idx.size < self.min_samples_split or (
                    self.max_depth is not None and depth >= self.max_depth):
                continue
            perm = self.rng.permutation(n_features)
            split = self._best_split(idx, perm[:self.max_features])
            if split is None and self.max_features < n_features:
                # every sampled feature was constant here; widen the search
                split = self._best_split(idx, perm[self.max_features:])
            if split is None:
                continue
            f, thr = split
            go_left = self.X[idx, f] <= thr
            self.feature[node], self.threshold[node] = int(f), float(thr)
            left, right = self._new_node(), self._new_node()
            self.left[node], self.right[node] = left, right
            stack.append((right, idx[~go_left], depth + 1))
            stack.append((left, idx[go_left], depth + 1))

    def arrays(self):
        return (np.array(self.feature, dtype=np.int64), np.array(self.threshold),
                np.array(self.left, dtype=np.int64), np.array(self.right, dtype=np.int64),
                np.array(self.vote, dtype=np.int64))


def resolve_max_features(rule, n_features: int) -> int:
    if rule is None or rule == "all":
        return n_features
    if rule == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if rule == "log2":
        return max(1, int(math.log2(n_features))) if n_features > 1 else 1
    if isinstance(rule, float):
        return max(1, min(n_features, int(rule * n_features)))
    return max(1, min(n_features, int(rule)))


class RandomForestModel(TrainedModel):
    kind = ModelKind.RF
    threshold = 0.5

    def __init__(self, trees, feature_dim, train_config):
        super().__init__(feature_dim, train_config)
        self.trees = trees    # list of (feature, threshold, left, right, vote)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def votes(self, X) -> np.ndarray:
        """Per-sample count of trees voting vulnerable."""
        X = self._check_input(X)
        total = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        for feature, threshold, left, right, vote in self.trees:
            node = np.zeros(X.shape[0], dtype=np.int64)
            active = feature[node] != _LEAF
            while active.any():
                n = node[active]
                go_left = X[rows[active], feature[n]] <= threshold[n]
                node[active] = np.where(go_left, left[n], right[n])
                active = feature[node] != _LEAF
            total += vote[node]
        return total

    def scores(self, X) -> np.ndarray:
        return self.votes(X) / self.n_trees

    def _arrays(self):
        out = {}
        for i, tree in enumerate(self.trees):
            for name, arr in zip(("feature", "threshold", "left", "right", "vote"), tree):
                out[f"tree{i}_{name}"] = arr
        return out

    @classmethod
    def _from_arrays(cls, arrays, meta):
        n = meta["train_config"]["n_trees"]
        trees = [tuple(arrays[f"tree{i}_{name}"] for name in
                       ("feature", "threshold", "left", "right", "vote")) for i in range(n)]
        return cls(trees, meta["feature_dim"], meta["train_config"])


def train_random_forest(X, y, n_trees: int = 100, max_depth: int | None = None,
                        max_features="sqrt", min_samples_split: int = 2, seed: int = 0,
                        balanced: bool = False) -> RandomForestModel:
    """Fit ``n_trees`` bootstrap trees with Gini splits.

    Rows are put into a canonical order before sampling, so the fitted
    forest does not depend on the order of the training rows.
    """
    X, y = check_training_data(X, y)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    canon = np.lexsort(np.column_stack([X, y]).T[::-1])
    X, y = X[canon], y[canon]
    w = class_weights(y, balanced)
    n, d = X.shape
    mtry = resolve_max_features(max_features, d)
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        boot = np.sort(rng.integers(0, n, n))
        builder = _TreeBuilder(X, y, w, mtry, max_depth, min_samples_split, rng)
        builder.build(boot)
        trees.append(builder.arrays())
    config = {"n_trees": n_trees, "max_depth": max_depth, "max_features": max_features,
              "min_samples_split": min_samples_split, "seed": seed, "balanced": balanced}
    return RandomForestModel(trees, d, config)
