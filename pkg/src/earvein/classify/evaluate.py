"""Accuracy, confusion matrix and per-class precision/recall on a test set."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .model import TrainedModel, predict_scores


@dataclass
class Misclassification:
    true: str
    predicted: str
    source: str


@dataclass
class EvalReport:
    kind: str
    classes: list[str]
    accuracy: float
    confusion: np.ndarray           # rows true, columns predicted
    precision: np.ndarray
    recall: np.ndarray
    errors: list[Misclassification]
    timing: dict[str, float] = field(default_factory=dict)

    @property
    def n_test(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "classes": self.classes, "accuracy": self.accuracy,
                "n_test": self.n_test, "n_correct": int(np.trace(self.confusion)),
                "confusion": self.confusion.tolist(),
                "precision": self.precision.tolist(), "recall": self.recall.tolist(),
                "errors": [e.__dict__ for e in self.errors], "timing": self.timing}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def confusion_table(self) -> str:
        """Plain-text confusion matrix, true classes down, predicted across."""
        names = self.classes
        w = max([len(n) for n in names] + [len(str(int(self.confusion.max(initial=0))))]) + 1
        lines = [" " * w + "".join(n.rjust(w) for n in names)]
        for name, row in zip(names, self.confusion):
            lines.append(name.rjust(w) + "".join(str(int(c)).rjust(w) for c in row))
        return "\n".join(lines)


def evaluate(model: TrainedModel, test: Dataset) -> EvalReport:
    if len(test) == 0:
        raise ValueError("empty test set")
    t0 = time.perf_counter()
    scores = predict_scores(model, test.vectors)
    elapsed = time.perf_counter() - t0
    pred = np.argmax(scores, axis=1)

    classes = list(model.classes)
    extra = sorted(set(test.labels) - set(classes))
    names = classes + extra     # unseen test labels get rows but are never predicted
    index = {c: i for i, c in enumerate(names)}
    truth = np.array([index[l] for l in test.labels])
    k = len(names)
    conf = np.zeros((k, k), dtype=np.int64)
    np.add.at(conf, (truth, pred), 1)

    tp = np.diag(conf).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(conf.sum(0) > 0, tp / conf.sum(0), 0.0)
        recall = np.where(conf.sum(1) > 0, tp / conf.sum(1), 0.0)
    errors = [Misclassification(test.labels[i], names[pred[i]], test.sources[i])
              for i in np.flatnonzero(pred != truth)]
    return EvalReport(kind=model.kind, classes=names, accuracy=float(tp.sum() / len(test)),
                      confusion=conf, precision=precision, recall=recall, errors=errors,
                      timing={"predict_s": elapsed, "per_vector_s": elapsed / len(test)})
