"""Inner-ear segmentation by adaptive red-channel and colour-ratio thresholds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import imgcore
from .errors import SegmentationEmpty


@dataclass(frozen=True)
class RoiConfig:
    percentile: float = 50.0          # red percentile for the low/medium contrast tiers
    red_clamp: tuple[float, float] = (20.0, 35.0)
    high_contrast_k: float = 0.3      # 30 <= sigma < 60
    very_high_contrast_k: float = 0.5  # sigma >= 60
    ratio_percentile: float = 90.0
    bright_scale: float = 0.9         # mean red > 60
    dark_scale: float = 1.1           # mean red < 10
    medium_scale: float = 1.0
    epsilon: float = 1e-6
    se_side: int = 5
    min_fraction: float = 0.005       # below this the result is flagged too_small


@dataclass(frozen=True)
class ChannelStats:
    mean: float
    stddev: float


@dataclass(frozen=True)
class RatioMaps:
    rg: np.ndarray
    rb: np.ndarray
    epsilon: float


@dataclass(frozen=True)
class RoiThresholds:
    t_red: float
    t_rg: float
    t_rb: float


@dataclass
class RoiResult:
    mask: np.ndarray
    roi_image: np.ndarray
    thresholds: RoiThresholds
    stats: ChannelStats
    status: str = "ok"                # "ok" or "too_small"
    stages: dict[str, np.ndarray] | None = None


def channel_stats(r: np.ndarray) -> ChannelStats:
    r = np.asarray(r, dtype=np.float64)
    if r.size == 0:
        raise ValueError("empty image")
    return ChannelStats(mean=float(r.mean()), stddev=float(r.std()))


def ratio_maps(r: np.ndarray, g: np.ndarray, b: np.ndarray, eps: float = 1e-6) -> RatioMaps:
    if not (np.shape(r) == np.shape(g) == np.shape(b)):
        raise ValueError("channel dimensions differ")
    if eps <= 0:
        raise ValueError("eps must be positive")
    r = np.asarray(r, dtype=np.float64)
    return RatioMaps(rg=r / (np.asarray(g, dtype=np.float64) + eps),
                     rb=r / (np.asarray(b, dtype=np.float64) + eps),
                     epsilon=eps)


def _hist_percentile(counts: np.ndarray, values: np.ndarray, q: float) -> float:
    """``np.percentile`` (linear method) of a sample given as ``counts`` of
    ascending ``values``."""
    cum = np.cumsum(counts)
    n = int(cum[-1])
    pos = q / 100.0 * (n - 1)
    lo = int(np.floor(pos))
    v_lo = values[np.searchsorted(cum, lo, side="right")]
    v_hi = values[np.searchsorted(cum, min(lo + 1, n - 1), side="right")]
    return float(v_lo + (pos - lo) * (v_hi - v_lo))


def _uint8_percentile(values: np.ndarray, q: float) -> float:
    values = np.asarray(values)
    if values.dtype != np.uint8:
        return float(np.percentile(values, q))
    return _hist_percentile(np.bincount(values.ravel(), minlength=256), np.arange(256), q)


_RATIO_LUTS: dict[float, tuple[np.ndarray, np.ndarray]] = {}


def _ratio_percentile(num: np.ndarray, den: np.ndarray, eps: float, q: float) -> float:
    """Exact percentile of ``num / (den + eps)`` for uint8 channels.

    The ratio takes at most 65536 values, so the sample is summarized by a
    joint histogram of (num, den) pairs instead of partitioning the map.
    """
    lut = _RATIO_LUTS.get(eps)
    if lut is None:
        a = np.arange(256, dtype=np.float64)
        vals = (a[:, None] / (a[None, :] + eps)).ravel()
        order = np.argsort(vals, kind="stable")
        lut = _RATIO_LUTS[eps] = (order, vals[order])
    order, sorted_vals = lut
    codes = num.astype(np.uint16) << 8 | den
    counts = np.bincount(codes.ravel(), minlength=65536)
    return _hist_percentile(counts[order], sorted_vals, q)


def red_threshold(stats: ChannelStats, r: np.ndarray, cfg: RoiConfig = RoiConfig()) -> float:
    """Contrast-tiered red threshold, always clamped to ``cfg.red_clamp``.

    Low and medium contrast use a percentile of the red values; high
    contrast uses ``mean + k * stddev`` with k = 0.3 or 0.5.
    """
    lo, hi = cfg.red_clamp
    s = stats.stddev
    if s < 30:
        t = _uint8_percentile(r, cfg.percentile)
    elif s < 60:
        t = stats.mean + cfg.high_contrast_k * s
    else:
        t = stats.mean + cfg.very_high_contrast_k * s
    return float(np.clip(t, lo, hi))


def contrast_tier(stats: ChannelStats) -> int:
    """0..3 for sigma < 10, < 30, < 60, >= 60."""
    return int(np.searchsorted([10, 30, 60], stats.stddev, side="right"))


def brightness_branch(stats: ChannelStats) -> str:
    if stats.mean > 60:
        return "bright"
    if stats.mean < 10:
        return "dark"
    return "medium"


def ratio_thresholds(maps: RatioMaps, mu_red: float, cfg: RoiConfig = RoiConfig(),
                     channels: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
                     ) -> tuple[float, float]:
    """Percentile ratio thresholds scaled by the brightness branch.

    ``channels`` optionally passes the uint8 ``(r, g, b)`` the maps came
    from, which allows an exact histogram shortcut for the percentiles.
    """
    scale = {"bright": cfg.bright_scale, "dark": cfg.dark_scale,
             "medium": cfg.medium_scale}[brightness_branch(ChannelStats(mu_red, 0.0))]
    q = cfg.ratio_percentile
    if channels is not None and all(np.asarray(c).dtype == np.uint8 for c in channels):
        r, g, b = channels
        p_rg = _ratio_percentile(r, g, maps.epsilon, q)
        p_rb = _ratio_percentile(r, b, maps.epsilon, q)
    else:
        p_rg = float(np.percentile(maps.rg, q))
        p_rb = float(np.percentile(maps.rb, q))
    return p_rg * scale, p_rb * scale


def raw_mask(r: np.ndarray, maps: RatioMaps, th: RoiThresholds) -> np.ndarray:
    return (np.asarray(r) >= th.t_red) & (maps.rg >= th.t_rg) & (maps.rb >= th.t_rb)


def refine_mask(m1: np.ndarray, side: int = 5) -> np.ndarray:
    return imgcore.morph_open(imgcore.morph_close(m1, side), side)


def largest_component(m3: np.ndarray) -> np.ndarray:
    if not np.any(m3):
        raise SegmentationEmpty("no candidate ear region")
    return imgcore.keep_largest(m3, 1)


def extract_roi(img: np.ndarray, cfg: RoiConfig = RoiConfig(), keep_stages: bool = False) -> RoiResult:
    r, g, b = imgcore.split_channels(img)
    stats = channel_stats(r)
    maps = ratio_maps(r, g, b, cfg.epsilon)
    t_rg, t_rb = ratio_thresholds(maps, stats.mean, cfg, (r, g, b))
    th = RoiThresholds(t_red=red_threshold(stats, r, cfg), t_rg=t_rg, t_rb=t_rb)
    m1 = raw_mask(r, maps, th)
    m3 = refine_mask(m1, cfg.se_side)
    m4 = largest_component(m3)
    filled = imgcore.fill_holes(m4)
    roi = np.where(filled[..., None], img, 0).astype(np.uint8)
    status = "too_small" if filled.mean() < cfg.min_fraction else "ok"
    stages = {"m1": m1, "m3": m3, "m4": m4} if keep_stages else None
    return RoiResult(mask=filled, roi_image=roi, thresholds=th, stats=stats,
                     status=status, stages=stages)
