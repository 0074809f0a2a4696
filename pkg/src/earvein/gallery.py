"""Enrollment store (JSON lines) and the image-to-identity path."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import roiseg, veinmap
from .classify import Dataset, TrainedModel, predict
from .errors import PipelineError
from .featvec import LENGTH, FeatureVector
from .pipeline import extract

VERSION = 1


class GalleryFormatError(ValueError):
    pass


@dataclass
class GalleryRecord:
    pig_id: str
    source: str
    features: FeatureVector
    enrolled_at: str

    def __post_init__(self):
        if not self.pig_id:
            raise ValueError("pig_id must be non-empty")
        if not isinstance(self.features, FeatureVector):
            self.features = FeatureVector(self.features, self.pig_id, self.source)

    def to_json(self) -> str:
        return json.dumps({"v": VERSION, "pig_id": self.pig_id, "source": self.source,
                           "enrolled_at": self.enrolled_at,
                           "features": [float(x) for x in self.features.values]})

    def __eq__(self, other) -> bool:
        return (isinstance(other, GalleryRecord) and self.pig_id == other.pig_id
                and self.source == other.source and self.enrolled_at == other.enrolled_at
                and np.array_equal(self.features.values, other.features.values))


@dataclass
class Gallery:
    records: list[GalleryRecord] = field(default_factory=list)
    version: int = VERSION

    def __len__(self) -> int:
        return len(self.records)

    @property
    def pig_ids(self) -> list[str]:
        return sorted({r.pig_id for r in self.records})

    def add(self, pig_id: str, features: FeatureVector, source: str = "",
            enrolled_at: str | None = None) -> GalleryRecord:
        if len(features.values) != LENGTH:
            raise ValueError("feature vector has the wrong length")
        rec = GalleryRecord(pig_id, source, FeatureVector(features.values, pig_id, source),
                            enrolled_at or _now())
        self.records.append(rec)
        return rec

    def dataset(self) -> Dataset:
        return Dataset([r.features.values for r in self.records] if self.records else np.zeros((0, LENGTH)),
                       [r.pig_id for r in self.records], [r.source for r in self.records])


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def enroll(g: Gallery, pig_id: str, image: np.ndarray, source: str = "",
           roi_cfg: roiseg.RoiConfig = roiseg.RoiConfig(),
           vein_cfg: veinmap.VeinConfig = veinmap.VeinConfig()) -> Gallery:
    """Append one record. Pipeline failures propagate and leave ``g`` unchanged."""
    try:
        ex = extract(image, roi_cfg, vein_cfg, pig_id=pig_id, source=source)
    except PipelineError as e:
        raise type(e)(f"{source or '<image>'}: {e}") from e
    g.add(pig_id, ex.features, source)
    return g


@dataclass
class Identification:
    ranked: list[tuple[str, float]]
    timing: dict[str, float]

    @property
    def best(self) -> str:
        return self.ranked[0][0]


def identify(g: Gallery, model: TrainedModel, image: np.ndarray, source: str = "",
             roi_cfg: roiseg.RoiConfig = roiseg.RoiConfig(),
             vein_cfg: veinmap.VeinConfig = veinmap.VeinConfig()) -> Identification:
    """Rank the model's classes for ``image``; read-only on ``g`` and ``model``.

    Scores cover every class the model knows; the gallery only checks that
    the model was trained on its pigs.
    """
    missing = set(g.pig_ids) - set(model.classes)
    if missing:
        raise ValueError(f"model was not trained on enrolled pigs: {sorted(missing)}")
    try:
        ex = extract(image, roi_cfg, vein_cfg, source=source)
    except PipelineError as e:
        raise type(e)(f"{source or '<image>'}: {e}") from e
    t0 = time.perf_counter()
    _, scores = predict(model, ex.features)
    t1 = time.perf_counter()
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    timing = dict(ex.timing)
    timing["classify_s"] = t1 - t0
    timing["total_s"] = timing["extract_s"] + timing["classify_s"]
    return Identification([(model.classes[i], float(scores[i])) for i in order], timing)


def save(g: Gallery, path: str | Path) -> None:
    with open(path, "w") as fh:
        for r in g.records:
            fh.write(r.to_json() + "\n")


def load(path: str | Path) -> Gallery:
    """Read a gallery, naming the offending line on any malformed record."""
    g = Gallery()
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise GalleryFormatError(f"{path}:{n}: malformed record ({e.msg})") from e
            if not isinstance(d, dict):
                raise GalleryFormatError(f"{path}:{n}: record is not an object")
            if d.get("v") != VERSION:
                raise GalleryFormatError(f"{path}:{n}: unsupported version {d.get('v')!r}")
            try:
                feats = np.array(d["features"], dtype=np.float64)
                rec = GalleryRecord(str(d["pig_id"]), str(d.get("source", "")),
                                    FeatureVector(feats, str(d["pig_id"]), str(d.get("source", ""))),
                                    str(d["enrolled_at"]))
            except (KeyError, TypeError, ValueError) as e:
                raise GalleryFormatError(f"{path}:{n}: invalid record ({e})") from e
            g.records.append(rec)
    return g
