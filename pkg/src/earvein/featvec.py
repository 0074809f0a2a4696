"""Fixed-length 68-value descriptor of a vein skeleton."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .veinmap import MinutiaeSet

LENGTH = 68
LAYOUT_VERSION = 1
ANGLE_BINS = 8
GRID = 10
DENSITY_KEPT = 50

# name -> (offset, length)
GROUPS = {
    "counts": (0, 2),
    "bifurcation_stats": (2, 2),
    "endpoint_stats": (4, 2),
    "coordinate_stats": (6, 4),
    "angle_hist": (10, ANGLE_BINS),
    "density_hist": (18, DENSITY_KEPT),
}


@dataclass
class PointStats:
    mean_dist: float
    std_dist: float


@dataclass
class FeatureVector:
    values: np.ndarray
    pig_id: str | None = None
    source: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.shape != (LENGTH,):
            raise ValueError(f"feature vector must have {LENGTH} values, got {self.values.size}")

    def group(self, name: str) -> np.ndarray:
        off, n = GROUPS[name]
        return self.values[off:off + n]

    def to_dict(self) -> dict:
        d = {"layout_version": LAYOUT_VERSION, "source": self.source,
             "features": [float(v) for v in self.values]}
        if self.pig_id is not None:
            d["pig_id"] = self.pig_id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureVector":
        if d.get("layout_version") != LAYOUT_VERSION:
            raise ValueError(f"unsupported layout_version {d.get('layout_version')!r}")
        return cls(np.array(d["features"], dtype=np.float64), d.get("pig_id"), d.get("source", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FeatureVector":
        return cls.from_dict(json.loads(text))


def _points(pts) -> np.ndarray:
    a = np.asarray(pts, dtype=np.float64)
    return a.reshape(-1, 2)


def pairwise_distance_stats(pts) -> PointStats:
    """Population mean and std of distances over unordered pairs."""
    p = _points(pts)
    if len(p) < 2:
        return PointStats(0.0, 0.0)
    i, j = np.triu_indices(len(p), k=1)
    d = np.hypot(p[j, 0] - p[i, 0], p[j, 1] - p[i, 1])
    return PointStats(float(d.mean()), float(d.std()))


def angle_histogram(pts) -> np.ndarray:
    """L1-normalized histogram of atan2 angles over all ordered pairs.

    Eight equal bins cover (-pi, pi]; bins are left-closed and the last one
    also takes pi.
    """
    p = _points(pts)
    out = np.zeros(ANGLE_BINS)
    n = len(p)
    if n < 2:
        return out
    dy = p[None, :, 1] - p[:, None, 1]
    dx = p[None, :, 0] - p[:, None, 0]
    off = ~np.eye(n, dtype=bool)
    theta = np.arctan2(dy[off], dx[off])
    idx = np.floor((theta + np.pi) / (2 * np.pi / ANGLE_BINS)).astype(np.int64)
    np.clip(idx, 0, ANGLE_BINS - 1, out=idx)
    out += np.bincount(idx, minlength=ANGLE_BINS)
    return out / out.sum()


def coordinate_stats(pts) -> tuple[float, float, float, float]:
    p = _points(pts)
    if len(p) == 0:
        return (0.0, 0.0, 0.0, 0.0)
    m = p.mean(axis=0)
    s = p.std(axis=0)
    return (float(m[0]), float(s[0]), float(m[1]), float(s[1]))


def density_grid(pts) -> np.ndarray:
    """Full 10x10 occupancy histogram over the unit square, rows indexed by y."""
    p = _points(pts)
    grid = np.zeros((GRID, GRID))
    if len(p) == 0:
        return grid
    cells = np.clip(np.floor(p * GRID).astype(np.int64), 0, GRID - 1)
    np.add.at(grid, (cells[:, 1], cells[:, 0]), 1.0)
    return grid / len(p)


def density_histogram(pts) -> np.ndarray:
    """First 50 row-major entries of the normalized grid (the top half, y < 0.5)."""
    return density_grid(pts).reshape(-1)[:DENSITY_KEPT].copy()


def assemble(m: MinutiaeSet, pig_id: str | None = None, source: str = "") -> FeatureVector:
    if m.image_width <= 0 or m.image_height <= 0:
        raise ValueError("image dimensions must be positive")
    scale = np.array([m.image_width, m.image_height], dtype=np.float64)
    bif = _points(m.bifurcations) / scale
    ends = _points(m.endpoints) / scale
    samples = _points(m.samples) / scale

    b = pairwise_distance_stats(bif)
    e = pairwise_distance_stats(ends)
    values = np.concatenate([
        [len(m.bifurcations), len(m.endpoints)],
        [b.mean_dist, b.std_dist],
        [e.mean_dist, e.std_dist],
        coordinate_stats(samples),
        angle_histogram(bif),
        density_histogram(samples),
    ])
    return FeatureVector(values, pig_id, source)


def csv_header() -> list[str]:
    return ["id"] + [f"f{i}" for i in range(LENGTH)]


def write_csv(path, vectors: Iterable[FeatureVector]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header())
        for v in vectors:
            w.writerow([v.pig_id or v.source] + [repr(float(x)) for x in v.values])


def read_csv(path) -> list[tuple[str, np.ndarray]]:
    rows = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != csv_header():
            raise ValueError(f"{path}: unexpected CSV header")
        for row in r:
            rows.append((row[0], np.array([float(x) for x in row[1:]])))
    return rows


def stack(vectors: Sequence[FeatureVector]) -> np.ndarray:
    if not vectors:
        return np.zeros((0, LENGTH))
    return np.stack([v.values for v in vectors])
