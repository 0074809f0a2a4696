"""CART trees with Gini impurity, bagged into a random forest."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Tree:
    # node arrays; a leaf has feature -1
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray      # (nodes, n_classes) training class counts

    def leaves(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            n = node[active]
            go_left = x[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        # argmax keeps the lowest class id on ties
        return np.argmax(self.counts[self.leaves(x)], axis=1)

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "counts": self.counts.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["counts"], dtype=np.float64))


def gini(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / n[..., None]
    return np.where(n > 0, 1.0 - (p * p).sum(axis=-1), 0.0)


def best_split(x: np.ndarray, onehot: np.ndarray, features: np.ndarray):
    """Lowest weighted Gini split over ``features``.

    Returns ``(feature, threshold, impurity)`` or None when every candidate
    feature is constant on these rows.
    """
    n = len(x)
    vals = x[:, features]                       # (n, f)
    order = np.argsort(vals, axis=0, kind="stable")
    sv = np.take_along_axis(vals, order, axis=0)
    left = np.cumsum(onehot[order], axis=0)     # (n, f, k) counts left of each cut
    total = left[-1]
    left = left[:-1]
    right = total[None] - left
    nl = np.arange(1, n)[:, None]
    score = (nl * gini(left) + (n - nl) * gini(right)) / n
    valid = sv[1:] > sv[:-1]
    if not valid.any():
        return None
    score = np.where(valid, score, np.inf)
    pos, col = np.unravel_index(np.argmin(score), score.shape)
    thr = 0.5 * (sv[pos, col] + sv[pos + 1, col])
    if not thr < sv[pos + 1, col]:              # midpoint rounded up onto the right value
        thr = sv[pos, col]
    return int(features[col]), float(thr), float(score[pos, col])


def grow_tree(x: np.ndarray, y: np.ndarray, n_classes: int, max_features: int,
              rng: np.random.Generator, min_leaf: int = 1) -> Tree:
    """Grow to purity. Each split draws ``max_features`` candidates; if all
    of those are constant the remaining features are tried before giving up."""
    d = x.shape[1]
    onehot = np.eye(n_classes)[y]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(onehot[rows].sum(axis=0))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)))]
    while stack:
        node, rows = stack.pop()
        if len(rows) < 2 * min_leaf or np.count_nonzero(counts[node]) <= 1:
            continue
        perm = rng.permutation(d)
        split = None
        for start in range(0, d, max_features):
            split = best_split(x[rows], onehot[rows], perm[start:start + max_features])
            if split is not None:
                break
        if split is None:
            continue
        f, t, _ = split
        go = x[rows, f] <= t
        l_rows, r_rows = rows[go], rows[~go]
        if len(l_rows) < min_leaf or len(r_rows) < min_leaf:
            continue
        feature[node], threshold[node] = f, t
        left[node] = new_node(l_rows)
        right[node] = new_node(r_rows)
        stack.append((right[node], r_rows))
        stack.append((left[node], l_rows))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts, dtype=np.float64))


@dataclass
class ForestParams:
    trees: list[Tree]
    n_classes: int
    max_features: int
    oob_accuracy: float | None = None

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "max_features": self.max_features,
                "oob_accuracy": self.oob_accuracy, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        return cls([Tree.from_dict(t) for t in d["trees"]], int(d["n_classes"]),
                   int(d["max_features"]), d.get("oob_accuracy"))


def tree_seeds(seed: int, n_trees: int) -> list[np.random.SeedSequence]:
    """Per-tree streams derived from the master seed, so the forest does not
    depend on the order or parallelism in which trees are grown."""
    return np.random.SeedSequence(seed).spawn(n_trees)


def fit_forest(x: np.ndarray, y: np.ndarray, n_classes: int, n_trees: int = 100,
               seed: int = 0, max_features: int | None = None) -> ForestParams:
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if len(np.unique(y)) < 2:
        raise ValueError("random forest needs at least two classes")
    n, d = x.shape
    mf = max_features or max(1, int(math.sqrt(d)))
    trees = []
    oob_votes = np.zeros((n, n_classes))
    for ss in tree_seeds(seed, n_trees):
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        t = grow_tree(x[boot], y[boot], n_classes, mf, rng)
        trees.append(t)
        oob = np.setdiff1d(np.arange(n), boot)
        if len(oob):
            oob_votes[oob, t.predict(x[oob])] += 1
    seen = oob_votes.sum(axis=1) > 0
    oob_acc = float((np.argmax(oob_votes[seen], axis=1) == y[seen]).mean()) if seen.any() else None
    return ForestParams(trees, n_classes, mf, oob_acc)


def forest_scores(p: ForestParams, z: np.ndarray) -> np.ndarray:
    """Fraction of trees voting for each class, shape (n, n_classes)."""
    z = np.atleast_2d(z)
    votes = np.zeros((len(z), p.n_classes))
    rows = np.arange(len(z))
    for t in p.trees:
        votes[rows, t.predict(z)] += 1
    return votes / len(p.trees)
