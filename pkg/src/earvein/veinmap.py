"""Vein skeleton and minutiae from a segmented ear."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi

from . import imgcore
from .errors import VeinsNotFound
from .roiseg import RoiResult


@dataclass(frozen=True)
class VeinConfig:
    min_object_size: int = 300
    major_components: int = 5
    sample_count: int = 200
    canny_low: float = 50
    canny_high: float = 150
    adaptive_block: int = 25
    adaptive_offset: float = 2
    clahe_tiles: int = 8
    clahe_clip: float = 2.0
    edge_margin: int = 8      # vein pixels this close to the ROI rim are dropped
    max_hole_area: int = 400  # enclosed gaps up to this size are filled before thinning
    spur_length: int = 10     # skeleton side branches up to this many pixels are pruned
    crop_pad: int = 16        # work on the ROI bounding box plus this border
    reference_width: int = 1024  # wider images are block-averaged towards this; 0 disables

    def __post_init__(self):
        if min(self.min_object_size, self.major_components, self.sample_count) < 1:
            raise ValueError("counts must be positive")
        if self.adaptive_block % 2 == 0:
            raise ValueError("adaptive_block must be odd")


@dataclass
class Skeleton:
    mask: np.ndarray

    def __post_init__(self):
        m = self.mask
        if np.any(m[:-1, :-1] & m[1:, :-1] & m[:-1, 1:] & m[1:, 1:]):
            raise ValueError("skeleton contains a 2x2 foreground block")


Point = tuple[int, int]


@dataclass
class MinutiaeSet:
    bifurcations: list[Point]
    endpoints: list[Point]
    samples: list[Point]
    image_width: int
    image_height: int
    stages: dict[str, np.ndarray] | None = field(default=None, repr=False, compare=False)


def enhance(roi: RoiResult, tiles: int = 8, clip: float = 2.0) -> np.ndarray:
    """CLAHE of the inverted red channel.

    Pixels outside the mask take the median in-mask value before
    equalization so the ear rim contributes no artificial edge.
    """
    inv = 255 - roi.roi_image[..., 0].astype(np.int16)
    mask = roi.mask
    if mask.any():
        inv = np.where(mask, inv, int(np.median(inv[mask])))
    return imgcore.clahe(inv.astype(np.uint8), tiles, clip)


def binarize_veins(enhanced: np.ndarray, cfg: VeinConfig = VeinConfig()) -> np.ndarray:
    sharp = imgcore.convolve3x3(enhanced, imgcore.SHARPEN_KERNEL)
    return imgcore.adaptive_mean_threshold(sharp, cfg.adaptive_block, cfg.adaptive_offset)


def clean_veins(raw: np.ndarray, cfg: VeinConfig = VeinConfig()) -> np.ndarray:
    opened = imgcore.morph_open(raw, 3)
    kept = imgcore.remove_small_objects(opened, cfg.min_object_size)
    return imgcore.dilate(kept, 3)


def keep_major_components(mask: np.ndarray, n: int) -> np.ndarray:
    return imgcore.keep_largest(mask, n)


def merge_edges(veins: np.ndarray, enhanced: np.ndarray, roi_mask: np.ndarray,
                cfg: VeinConfig = VeinConfig()) -> np.ndarray:
    if not (veins.shape == enhanced.shape == roi_mask.shape):
        raise ValueError("dimension mismatch")
    edges = imgcore.canny(enhanced, cfg.canny_low, cfg.canny_high)
    return (edges | veins) & roi_mask


_STEPS = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]


def prune_spurs(skel: np.ndarray, max_length: int) -> np.ndarray:
    """Remove side branches of at most ``max_length`` pixels that run from an
    endpoint into a junction. Free-standing curves are left alone."""
    if max_length <= 0:
        return skel
    sk = np.pad(skel, 1).astype(bool)
    nb = np.pad(imgcore.neighbour_count(skel), 1)
    for y0, x0 in zip(*np.nonzero(sk & (nb == 1))):
        path = [(y0, x0)]
        prev, cur = None, (y0, x0)
        while len(path) <= max_length:
            nxt = [(cur[0] + dy, cur[1] + dx) for dy, dx in _STEPS
                   if sk[cur[0] + dy, cur[1] + dx] and (cur[0] + dy, cur[1] + dx) != prev
                   and (cur[0] + dy, cur[1] + dx) not in path]
            if len(nxt) != 1:
                break
            prev, cur = cur, nxt[0]
            if nb[cur] > 2:
                for p in path:
                    sk[p] = False
                break
            path.append(cur)
    # removing a spur can leave a staircase pixel at the old junction
    return imgcore.skeletonize(sk[1:-1, 1:-1])


def extract_skeleton(mask: np.ndarray, spur_length: int = 0) -> Skeleton:
    return Skeleton(prune_spurs(imgcore.skeletonize(mask), spur_length))


def _cluster_representatives(mask: np.ndarray) -> list[Point]:
    """One point per 8-connected cluster: the member closest to the centroid."""
    labels, n = ndi.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return []
    ys, xs = np.nonzero(labels)
    lab = labels[ys, xs]
    out = []
    for k, sl in enumerate(ndi.find_objects(labels), start=1):
        sel = lab == k
        cy, cx = ys[sel].mean(), xs[sel].mean()
        i = np.argmin((ys[sel] - cy) ** 2 + (xs[sel] - cx) ** 2)
        out.append((int(xs[sel][i]), int(ys[sel][i])))
    out.sort(key=lambda p: (p[1], p[0]))
    return out


def detect_minutiae(sk: Skeleton) -> tuple[list[Point], list[Point]]:
    """``(bifurcations, endpoints)`` as ``(x, y)`` pixels.

    Endpoints have exactly one 8-neighbour; pixels with more than two
    neighbours are bifurcation candidates, and adjacent candidates collapse
    into a single bifurcation.
    """
    m = sk.mask
    nb = imgcore.neighbour_count(m)
    ys, xs = np.nonzero(m & (nb == 1))
    endpoints = [(int(x), int(y)) for y, x in zip(ys, xs)]
    bifurcations = _cluster_representatives(m & (nb > 2))
    return bifurcations, endpoints


def sample_skeleton(sk: Skeleton, count: int) -> list[Point]:
    if count < 1:
        raise ValueError("count must be >= 1")
    ys, xs = np.nonzero(sk.mask)  # row-major order
    p = len(ys)
    if p == 0:
        return []
    stride = -(-p // count)
    return [(int(x), int(y)) for y, x in zip(ys[::stride], xs[::stride])]


def _bbox(mask: np.ndarray, pad: int) -> tuple[slice, slice]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    h, w = mask.shape
    return (slice(max(rows[0] - pad, 0), min(rows[-1] + pad + 1, h)),
            slice(max(cols[0] - pad, 0), min(cols[-1] + pad + 1, w)))


def working_factor(width: int, reference_width: int) -> int:
    """Integer downsampling factor bringing ``width`` near the reference."""
    if reference_width <= 0:
        return 1
    return max(1, int(round(width / reference_width)))


def _block_mean(a: np.ndarray, f: int) -> np.ndarray:
    h, w = a.shape[:2]
    a = a[:h - h % f, :w - w % f]
    return a.reshape(h // f, f, w // f, f, *a.shape[2:]).mean(axis=(1, 3))


def extract_veins(roi: RoiResult, cfg: VeinConfig = VeinConfig(),
                  keep_stages: bool = False) -> MinutiaeSet:
    """Full chain from a segmented ear to minutiae.

    Processing runs on the bounding box of the ROI mask (plus
    ``cfg.crop_pad``). Kernel sizes and area limits are tuned for a
    ``cfg.reference_width`` frame, so larger frames are block-averaged by an
    integer factor first. Reported points are in full-image coordinates.
    """
    h, w = roi.mask.shape
    if not roi.mask.any():
        raise VeinsNotFound("empty ROI mask")
    f = working_factor(w, cfg.reference_width)
    sy, sx = _bbox(roi.mask, cfg.crop_pad * f)
    mask, image = roi.mask[sy, sx], roi.roi_image[sy, sx]
    if f > 1:
        mask = _block_mean(mask.astype(np.float32), f) >= 0.5
        image = (_block_mean(image.astype(np.float32), f) + 0.5).astype(np.uint8)
        if not mask.any():
            raise VeinsNotFound("ROI vanishes at working resolution")
    crop = RoiResult(mask=mask, roi_image=image, thresholds=roi.thresholds,
                     stats=roi.stats, status=roi.status)

    enhanced = enhance(crop, cfg.clahe_tiles, cfg.clahe_clip)
    binary = binarize_veins(enhanced, cfg)
    inner = imgcore.erode(crop.mask, 2 * cfg.edge_margin + 1) if cfg.edge_margin else crop.mask
    binary &= inner
    clean = clean_veins(binary, cfg)
    major = keep_major_components(clean, cfg.major_components)
    merged = merge_edges(major, enhanced, inner, cfg)
    merged = imgcore.fill_small_holes(merged, cfg.max_hole_area)
    sk = extract_skeleton(merged, cfg.spur_length)
    if not sk.mask.any():
        raise VeinsNotFound("vein skeleton is empty")
    bif, ends = detect_minutiae(sk)
    samples = sample_skeleton(sk, cfg.sample_count)

    def shift(pts):
        off = (f - 1) // 2
        return [(x * f + off + sx.start, y * f + off + sy.start) for x, y in pts]

    stages = None
    if keep_stages:
        def full(a, dtype=bool):
            if f > 1:
                a = np.repeat(np.repeat(a, f, axis=0), f, axis=1)
            out = np.zeros((h, w), dtype=dtype)
            ch, cw = min(a.shape[0], sy.stop - sy.start), min(a.shape[1], sx.stop - sx.start)
            out[sy.start:sy.start + ch, sx.start:sx.start + cw] = a[:ch, :cw]
            return out
        stages = {"enhanced": full(enhanced, np.uint8), "binary": full(binary),
                  "clean": full(major), "merged": full(merged), "skeleton": full(sk.mask)}
    return MinutiaeSet(bifurcations=shift(bif), endpoints=shift(ends), samples=shift(samples),
                       image_width=w, image_height=h, stages=stages)
