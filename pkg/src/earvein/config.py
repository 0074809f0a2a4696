"""Run configuration: built-in defaults, optionally overridden by a TOML file
and then by command-line flags."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import tomli

from .classify import TrainConfig
from .roiseg import RoiConfig
from .veinmap import VeinConfig

_SECTIONS = {"roi": RoiConfig, "vein": VeinConfig, "train": TrainConfig}


@dataclass(frozen=True)
class Config:
    roi: RoiConfig = field(default_factory=RoiConfig)
    vein: VeinConfig = field(default_factory=VeinConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    train_frac: float = 0.8
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.train_frac < 1:
            raise ValueError("train_frac must lie in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def _section(cls, base, values: dict, where: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(values) - set(known)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    # TOML arrays arrive as lists; tuple-typed fields want tuples
    fixed = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    return replace(base, **fixed)


def from_mapping(data: dict, base: Config = Config(), where: str = "config") -> Config:
    top = {}
    parts = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ValueError(f"{where}: [{key}] must be a table")
            parts[key] = _section(_SECTIONS[key], getattr(base, key), value, f"{where} [{key}]")
        elif key in ("seed", "train_frac", "workers"):
            top[key] = value
        else:
            raise ValueError(f"{where}: unknown key {key!r}")
    return replace(base, **parts, **top)


def load(path: str | Path) -> Config:
    with open(path, "rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as e:
            raise ValueError(f"{path}: {e}") from e
    return from_mapping(data, Config(), str(path))


# command-line flag -> (section or None for top level, field)
FLAGS = {
    "roi_percentile": ("roi", "percentile"),
    "min_object_size": ("vein", "min_object_size"),
    "major_components": ("vein", "major_components"),
    "svm_c": ("train", "svm_c"),
    "svm_gamma": ("train", "svm_gamma"),
    "rf_trees": ("train", "rf_trees"),
    "knn_k": ("train", "knn_k"),
    "lr_l2": ("train", "lr_l2"),
    "train_frac": (None, "train_frac"),
    "seed": (None, "seed"),
    "workers": (None, "workers"),
}


def override(cfg: Config, **flags) -> Config:
    """Apply the flag values that are not None on top of ``cfg``."""
    parts: dict[str, dict] = {}
    top = {}
    for key, value in flags.items():
        if value is None:
            continue
        section, name = FLAGS[key]
        if section is None:
            top[name] = value
        else:
            parts.setdefault(section, {})[name] = value
    new = {sec: replace(getattr(cfg, sec), **vals) for sec, vals in parts.items()}
    return replace(cfg, **new, **top)
