"""Trained-model container, prediction and JSON persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..featvec import LENGTH, LAYOUT_VERSION, FeatureVector
from .data import Dataset, Standardizer, fit_standardizer
from .forest import ForestParams, fit_forest, forest_scores
from .knn import KNNParams, fit_knn, knn_scores
from .logreg import LRParams, fit_lr, lr_scores
from .svm import SVMParams, fit_svm, svm_scores

KINDS = ("svm", "rf", "knn", "lr")
_PARAMS = {"svm": SVMParams, "rf": ForestParams, "knn": KNNParams, "lr": LRParams}
_SCORES = {"svm": svm_scores, "rf": forest_scores, "knn": knn_scores, "lr": lr_scores}


@dataclass(frozen=True)
class TrainConfig:
    svm_c: float = 10.0
    svm_gamma: float | str = "scale"
    rf_trees: int = 100
    knn_k: int = 5
    lr_l2: float = 1.0

    def __post_init__(self):
        if self.svm_c <= 0 or self.rf_trees < 1 or self.knn_k < 1 or self.lr_l2 < 0:
            raise ValueError("invalid classifier hyperparameters")
        if self.svm_gamma != "scale" and float(self.svm_gamma) <= 0:
            raise ValueError("svm_gamma must be 'scale' or positive")


@dataclass
class TrainedModel:
    kind: str
    classes: list[str]
    standardizer: Standardizer
    params: SVMParams | ForestParams | KNNParams | LRParams
    seed: int = 0
    train_config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"layout_version": LAYOUT_VERSION, "kind": self.kind, "classes": self.classes,
                "standardizer": self.standardizer.to_dict(), "params": self.params.to_dict(),
                "seed": self.seed, "train_config": self.train_config}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("layout_version") != LAYOUT_VERSION:
            raise ValueError(f"unsupported model layout_version {d.get('layout_version')!r}")
        kind = d.get("kind")
        if kind not in KINDS:
            raise ValueError(f"unknown model kind {kind!r}")
        return cls(kind, list(d["classes"]), Standardizer.from_dict(d["standardizer"]),
                   _PARAMS[kind].from_dict(d["params"]), int(d.get("seed", 0)),
                   dict(d.get("train_config", {})))


def train(kind: str, data: Dataset, cfg: TrainConfig = TrainConfig(), seed: int = 0) -> TrainedModel:
    """Fit a standardizer on ``data`` and one classifier of ``kind`` on top."""
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    if len(data) == 0:
        raise ValueError("empty training set")
    classes = data.classes
    if len(classes) < 2:
        raise ValueError("training needs at least two classes")
    std = fit_standardizer(data)
    x = std.apply(data.vectors)
    y = data.y(classes)
    k = len(classes)
    if kind == "svm":
        params = fit_svm(x, y, k, cfg.svm_c, cfg.svm_gamma)
    elif kind == "rf":
        params = fit_forest(x, y, k, cfg.rf_trees, seed)
    elif kind == "knn":
        params = fit_knn(x, y, k, cfg.knn_k)
    else:
        params = fit_lr(x, y, k, cfg.lr_l2)
    tc = {"svm_c": cfg.svm_c, "svm_gamma": cfg.svm_gamma, "rf_trees": cfg.rf_trees,
          "knn_k": cfg.knn_k, "lr_l2": cfg.lr_l2, "n_train": len(data)}
    return TrainedModel(kind, classes, std, params, seed, tc)


def _matrix(v) -> np.ndarray:
    if isinstance(v, FeatureVector):
        v = v.values
    a = np.asarray(v, dtype=np.float64)
    if a.ndim == 1:
        a = a[None]
    if a.ndim != 2 or a.shape[1] != LENGTH:
        raise ValueError(f"expected feature vectors of length {LENGTH}, got shape {np.shape(v)}")
    return a


def predict_scores(model: TrainedModel, vectors) -> np.ndarray:
    """Per-class scores for each row, shape (n, n_classes)."""
    return _SCORES[model.kind](model.params, model.standardizer.apply(_matrix(vectors)))


def predict(model: TrainedModel, v) -> tuple[str, np.ndarray]:
    """``(label, per-class scores)`` for a single vector; ties go to the first class."""
    a = _matrix(v)
    if len(a) != 1:
        raise ValueError("predict takes one vector; use predict_scores for batches")
    s = predict_scores(model, a)[0]
    return model.classes[int(np.argmax(s))], s


def predict_labels(model: TrainedModel, vectors) -> list[str]:
    s = predict_scores(model, vectors)
    return [model.classes[i] for i in np.argmax(s, axis=1)]


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()))


def load_model(path: str | Path) -> TrainedModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: not a model file ({e})") from e
    return TrainedModel.from_dict(d)
