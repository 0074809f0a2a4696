"""Labelled feature sets, z-scoring and stratified splits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..featvec import LENGTH, FeatureVector


@dataclass
class Dataset:
    vectors: np.ndarray          # (n, 68)
    labels: list[str]
    sources: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64).reshape(-1, LENGTH) \
            if np.size(self.vectors) else np.zeros((0, LENGTH))
        self.labels = [str(l) for l in self.labels]
        if len(self.labels) != len(self.vectors):
            raise ValueError("vectors and labels differ in length")
        if not self.sources:
            self.sources = [""] * len(self.labels)
        elif len(self.sources) != len(self.labels):
            raise ValueError("sources and labels differ in length")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.labels))

    @property
    def class_index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.classes)}

    def y(self, classes: list[str] | None = None) -> np.ndarray:
        idx = {c: i for i, c in enumerate(classes or self.classes)}
        return np.array([idx[l] for l in self.labels], dtype=np.int64)

    def subset(self, rows) -> "Dataset":
        rows = list(rows)
        return Dataset(self.vectors[rows], [self.labels[i] for i in rows],
                       [self.sources[i] for i in rows])

    @classmethod
    def from_vectors(cls, vectors: list[FeatureVector]) -> "Dataset":
        if any(v.pig_id is None for v in vectors):
            raise ValueError("every feature vector needs a pig_id")
        return cls(np.stack([v.values for v in vectors]) if vectors else np.zeros((0, LENGTH)),
                   [v.pig_id for v in vectors], [v.source for v in vectors])


@dataclass
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def divisor(self) -> np.ndarray:
        return np.where(self.stds > 0, self.stds, 1.0)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.means) / self.divisor()

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.divisor() + self.means

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["means"], dtype=np.float64), np.array(d["stds"], dtype=np.float64))


def fit_standardizer(train: Dataset | np.ndarray) -> Standardizer:
    x = train.vectors if isinstance(train, Dataset) else np.asarray(train, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("cannot standardize an empty set")
    return Standardizer(x.mean(axis=0), x.std(axis=0))


def stratified_split(d: Dataset, train_frac: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Per class, ``round(n * train_frac)`` shuffled members go to train."""
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    labels = np.array(d.labels)
    for c in d.classes:
        rows = np.flatnonzero(labels == c)
        if len(rows) < 2:
            raise ValueError(f"class {c!r} has fewer than 2 samples")
        rows = rows[rng.permutation(len(rows))]
        # half-up rounding, kept off both ends so each side gets a member
        k = min(max(int(np.floor(len(rows) * train_frac + 0.5)), 1), len(rows) - 1)
        train.extend(rows[:k])
        test.extend(rows[k:])
    return d.subset(sorted(train)), d.subset(sorted(test))
