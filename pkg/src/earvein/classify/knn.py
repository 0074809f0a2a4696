"""Distance-weighted k-nearest-neighbour voting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WEIGHT_EPS = 1e-12


@dataclass
class KNNParams:
    x: np.ndarray       # standardized training set
    y: np.ndarray
    k: int
    n_classes: int

    def to_dict(self) -> dict:
        return {"k": self.k, "n_classes": self.n_classes, "x": self.x.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KNNParams":
        return cls(np.array(d["x"], dtype=np.float64), np.array(d["y"], dtype=np.int64),
                   int(d["k"]), int(d["n_classes"]))


def fit_knn(x: np.ndarray, y: np.ndarray, n_classes: int, k: int = 5) -> KNNParams:
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(x) == 0:
        raise ValueError("empty training set")
    return KNNParams(np.array(x, dtype=np.float64), np.asarray(y, dtype=np.int64), k, n_classes)


def knn_scores(p: KNNParams, z: np.ndarray) -> np.ndarray:
    """Normalized class weights sum(1 / (d + eps)) over the k nearest.

    Neighbours are ranked by distance, then training index. A query at zero
    distance from a training point takes that point's label outright.
    """
    z = np.atleast_2d(z)
    d = np.sqrt(np.maximum(((z[:, None, :] - p.x[None, :, :]) ** 2).sum(-1), 0.0))
    k = min(p.k, len(p.x))
    out = np.zeros((len(z), p.n_classes))
    for q in range(len(z)):
        order = np.argsort(d[q], kind="stable")[:k]
        if d[q, order[0]] == 0.0:
            out[q, p.y[order[0]]] = 1.0
            continue
        np.add.at(out[q], p.y[order], 1.0 / (d[q, order] + WEIGHT_EPS))
        out[q] /= out[q].sum()
    return out
