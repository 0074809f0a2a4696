"""Raster primitives shared by every pipeline stage.

Images are plain numpy arrays:

* gray image   -- ``uint8`` array of shape ``(H, W)``
* RGB raster   -- ``uint8`` array of shape ``(H, W, 3)``
* binary mask  -- ``bool`` array of shape ``(H, W)``

All functions are pure and never modify their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

SHARPEN_KERNEL = np.array([[0, -1, 0], [-1, 5, -1], [0, -1, 0]], dtype=np.int32)

_EIGHT = np.ones((3, 3), dtype=bool)
_FOUR = ndi.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class LabelMap:
    """Connected-component labeling: ``labels`` (0 = background) and
    ``sizes[k]`` pixel count of label ``k`` (``sizes[0]`` is unused, 0)."""

    labels: np.ndarray
    sizes: np.ndarray

    @property
    def count(self) -> int:
        return len(self.sizes) - 1


def _as_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D gray image, got shape {img.shape}")
    return img


def split_channels(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) raster, got shape {img.shape}")
    return img[..., 0].copy(), img[..., 1].copy(), img[..., 2].copy()


def _equalization_lut(hist: np.ndarray, clip: float) -> np.ndarray:
    """Clip a 256-bin histogram, redistribute the excess evenly and return
    the cumulative mapping to [0, 255]."""
    hist = hist.astype(np.float64)
    total = hist.sum()
    if np.isfinite(clip):
        excess = np.clip(hist - clip, 0, None).sum()
        hist = np.minimum(hist, clip) + excess / 256.0
    cdf = np.cumsum(hist)
    return np.clip(np.round(cdf * 255.0 / total), 0, 255)


def clahe(img: np.ndarray, tiles: int = 8, clip_limit: float = 2.0) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization.

    The image is split into ``tiles x tiles`` regions; each region's
    histogram is clipped at ``clip_limit`` times its mean bin height and
    equalized. Pixels are mapped by bilinear blending of the four nearest
    tile mappings. Images with fewer than ``tiles`` pixels along an axis get
    a single global mapping.
    """
    img = _as_gray(img).astype(np.uint8, copy=False)
    if tiles < 1 or not clip_limit > 0:
        raise ValueError("tiles must be >= 1 and clip_limit > 0")
    h, w = img.shape
    if h < tiles or w < tiles:
        tiles = 1
    ys = np.linspace(0, h, tiles + 1).round().astype(int)
    xs = np.linspace(0, w, tiles + 1).round().astype(int)

    luts = np.empty((tiles, tiles, 256), dtype=np.float32)
    for i in range(tiles):
        for j in range(tiles):
            tile = img[ys[i]:ys[i + 1], xs[j]:xs[j + 1]]
            hist = np.bincount(tile.ravel(), minlength=256)
            luts[i, j] = _equalization_lut(hist, clip_limit * tile.size / 256.0)

    if tiles == 1:
        return luts[0, 0][img].astype(np.uint8)

    def axis_weights(edges: np.ndarray, n: int):
        centers = (edges[:-1] + edges[1:] - 1) / 2.0
        pos = np.arange(n, dtype=np.float64)
        lo = np.clip(np.searchsorted(centers, pos, side="right") - 1, 0, tiles - 1)
        hi = np.minimum(lo + 1, tiles - 1)
        span = np.where(hi > lo, centers[hi] - centers[lo], 1.0)
        frac = np.clip((pos - centers[lo]) / span, 0.0, 1.0)
        frac[hi == lo] = 0.0
        return lo, hi, frac.astype(np.float32)

    y0, y1, fy = axis_weights(ys, h)
    x0, x1, fx = axis_weights(xs, w)
    out = np.empty((h, w), dtype=np.float32)
    # Rows sharing a tile pair are processed together so each LUT lookup is
    # a flat take on a contiguous pixel block.
    for i in range(tiles):
        rows = np.nonzero(y0 == i)[0]
        if rows.size == 0:
            continue
        r0, r1 = rows[0], rows[-1] + 1
        block = img[r0:r1]
        wy = fy[r0:r1, None]
        top = np.empty(block.shape, dtype=np.float32)
        bot = np.empty(block.shape, dtype=np.float32)
        for j in range(tiles):
            cols = np.nonzero(x0 == j)[0]
            if cols.size == 0:
                continue
            c0, c1 = cols[0], cols[-1] + 1
            v = block[:, c0:c1]
            wx = fx[None, c0:c1]
            ia, ib = i, y1[r0]
            ja, jb = j, x1[c0]
            top[:, c0:c1] = luts[ia, ja][v] * (1 - wx) + luts[ia, jb][v] * wx
            bot[:, c0:c1] = luts[ib, ja][v] * (1 - wx) + luts[ib, jb][v] * wx
        out[r0:r1] = top * (1 - wy) + bot * wy
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def convolve3x3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """True 2-D convolution with a 3x3 kernel, replicate borders, result
    clamped to [0, 255]."""
    img = _as_gray(img)
    k = np.asarray(kernel).reshape(3, 3)[::-1, ::-1]
    h, w = img.shape
    padded = np.pad(img.astype(np.int32), 1, mode="edge")
    acc = np.zeros((h, w), dtype=np.float64 if k.dtype.kind == "f" else np.int32)
    for dy in range(3):
        for dx in range(3):
            c = k[dy, dx]
            if c:
                acc += c * padded[dy:dy + h, dx:dx + w]
    return np.clip(np.round(acc), 0, 255).astype(np.uint8)


def _box_sum(img: np.ndarray, block: int) -> np.ndarray:
    """Sum over a ``block x block`` window with replicate borders (exact int64)."""
    r = block // 2
    h, w = img.shape
    padded = np.pad(img.astype(np.int64), r, mode="edge")
    sat = np.zeros((h + 2 * r + 1, w + 2 * r + 1), dtype=np.int64)
    np.cumsum(np.cumsum(padded, axis=0), axis=1, out=sat[1:, 1:])
    return (sat[block:block + h, block:block + w] - sat[:h, block:block + w]
            - sat[block:block + h, :w] + sat[:h, :w])


def adaptive_mean_threshold(img: np.ndarray, block: int = 25, offset: float = 2) -> np.ndarray:
    """Foreground where a pixel exceeds its ``block x block`` local mean by
    more than ``offset`` (replicate borders)."""
    img = _as_gray(img)
    if block < 3 or block % 2 == 0:
        raise ValueError("block must be odd and >= 3")
    area = block * block
    sums = _box_sum(img, block)
    # integer-exact form of img > sum/area + offset
    return img.astype(np.int64) * area > sums + offset * area


def _check_side(side: int) -> int:
    if side < 1 or side % 2 == 0:
        raise ValueError("structuring element side must be odd and positive")
    return side


def _window_reduce(m: np.ndarray, side: int, axis: int, op, fill: bool) -> np.ndarray:
    """Centered running OR/AND of length ``side`` along ``axis``; samples past
    the border take ``fill``."""
    if axis == 1:
        return _window_reduce(m.T, side, 0, op, fill).T
    r = side // 2
    n = m.shape[0]
    a = np.pad(m, [(r, r), (0, 0)], constant_values=fill)
    # doubling: acc[i] covers a[i : i + width]
    acc, width = a, 1
    while width * 2 <= side:
        acc = op(acc[:-width], acc[width:])
        width *= 2
    rest = side - width
    if rest:
        acc = op(acc[:-rest], acc[rest:])
    return acc[:n]


def dilate(mask: np.ndarray, side: int = 3) -> np.ndarray:
    """Dilation by a filled ``side x side`` square centred on the origin."""
    side = _check_side(side)
    m = np.asarray(mask, dtype=bool)
    if side == 1:
        return m.copy()
    m = _window_reduce(m, side, 0, np.logical_or, False)
    return _window_reduce(m, side, 1, np.logical_or, False)


def erode(mask: np.ndarray, side: int = 3) -> np.ndarray:
    """Erosion by a filled square; pixels beyond the border count as background."""
    side = _check_side(side)
    m = np.asarray(mask, dtype=bool)
    if side == 1:
        return m.copy()
    m = _window_reduce(m, side, 0, np.logical_and, False)
    return _window_reduce(m, side, 1, np.logical_and, False)


def morph_close(mask: np.ndarray, side: int = 3) -> np.ndarray:
    return erode(dilate(mask, side), side)


def morph_open(mask: np.ndarray, side: int = 3) -> np.ndarray:
    return dilate(erode(mask, side), side)


def connected_components(mask: np.ndarray) -> LabelMap:
    """8-connected labeling. Labels are numbered 1..K in raster order of each
    component's first pixel."""
    labels, count = ndi.label(np.asarray(mask, dtype=bool), structure=_EIGHT)
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    sizes[0] = 0
    return LabelMap(labels=labels, sizes=sizes)


def remove_small_objects(mask: np.ndarray, min_size: int) -> np.ndarray:
    if min_size < 0:
        raise ValueError("min_size must be >= 0")
    lm = connected_components(mask)
    keep = lm.sizes >= min_size
    keep[0] = False
    return keep[lm.labels]


def keep_largest(mask: np.ndarray, n: int) -> np.ndarray:
    """Keep the ``n`` largest 8-connected components; equal sizes are ranked
    by label (scan order)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lm = connected_components(mask)
    if lm.count == 0:
        return np.zeros(np.shape(mask), dtype=bool)
    # stable sort on -size keeps lower labels first among ties
    order = np.argsort(-lm.sizes[1:], kind="stable") + 1
    keep = np.zeros(len(lm.sizes), dtype=bool)
    keep[order[:n]] = True
    return keep[lm.labels]


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Turn every background region that does not touch the image border into
    foreground. Background is 4-connected (dual of 8-connected foreground)."""
    mask = np.asarray(mask, dtype=bool)
    bg_labels, _ = ndi.label(~mask, structure=_FOUR)
    border = np.unique(np.concatenate([bg_labels[0], bg_labels[-1],
                                       bg_labels[:, 0], bg_labels[:, -1]]))
    outside = np.isin(bg_labels, border[border > 0])
    return ~outside


def fill_small_holes(mask: np.ndarray, max_area: int) -> np.ndarray:
    """Like :func:`fill_holes` but only for enclosed regions of at most
    ``max_area`` pixels."""
    mask = np.asarray(mask, dtype=bool)
    bg_labels, n = ndi.label(~mask, structure=_FOUR)
    sizes = np.bincount(bg_labels.ravel(), minlength=n + 1)
    small = sizes <= max_area
    small[0] = False
    border = np.concatenate([bg_labels[0], bg_labels[-1], bg_labels[:, 0], bg_labels[:, -1]])
    small[border] = False
    return mask | small[bg_labels]


def _gaussian_kernel(sigma: float, size: int) -> np.ndarray:
    x = np.arange(size) - size // 2
    k = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return k / k.sum()


def canny(img: np.ndarray, low: float = 50, high: float = 150, sigma: float = 1.4) -> np.ndarray:
    """Canny edges: 5x5 Gaussian smoothing, Sobel gradients, non-maximum
    suppression along the quantized gradient direction and hysteresis."""
    img = _as_gray(img)
    if not 0 <= low <= high:
        raise ValueError("need 0 <= low <= high")
    g = _gaussian_kernel(sigma, 5).astype(np.float32)
    sm = ndi.correlate1d(img.astype(np.float32), g, axis=0, mode="nearest")
    sm = ndi.correlate1d(sm, g, axis=1, mode="nearest")
    p = np.pad(sm, 1, mode="edge")
    h, w = img.shape
    # Sobel: smooth [1,2,1] across, difference along
    sx = p[:, 2:] - p[:, :-2]
    gx = sx[:-2] + 2 * sx[1:-1] + sx[2:]
    sy = p[2:] - p[:-2]
    gy = sy[:, :-2] + 2 * sy[:, 1:-1] + sy[:, 2:]
    mag = np.hypot(gx, gy)

    ax, ay = np.abs(gx), np.abs(gy)
    t22 = np.float32(0.41421356)  # tan(22.5 deg)
    horiz = ay <= t22 * ax                       # gradient ~ along x
    vert = ax <= t22 * ay                        # gradient ~ along y
    same_sign = (gx * gy) > 0                    # gradient along main diagonal

    mp = np.pad(mag, 1, mode="constant")
    def nb(dy, dx):
        return mp[1 + dy:h + 1 + dy, 1 + dx:w + 1 + dx]

    before = np.where(horiz, nb(0, -1),
             np.where(vert, nb(-1, 0),
             np.where(same_sign, nb(-1, -1), nb(-1, 1))))
    after = np.where(horiz, nb(0, 1),
            np.where(vert, nb(1, 0),
            np.where(same_sign, nb(1, 1), nb(1, -1))))
    peak = (mag > before) & (mag >= after) & (mag > 0)
    weak = peak & (mag >= low)
    strong = peak & (mag >= high)
    if not strong.any():
        return np.zeros((h, w), dtype=bool)
    labels, count = ndi.label(weak, structure=_EIGHT)
    keep = np.zeros(count + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels]


# --- thinning -----------------------------------------------------------------
# Neighbour bit order: P2=N, P3=NE, P4=E, P5=SE, P6=S, P7=SW, P8=W, P9=NW.
_OFFSETS = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]


def _bits(code: int) -> list[int]:
    return [(code >> i) & 1 for i in range(8)]


def _is_simple(n: list[int]) -> bool:
    """Simple-point test for 8-connected foreground / 4-connected background."""
    pos = [_OFFSETS[i] for i in range(8) if n[i]]
    if not pos:
        return False
    # foreground neighbours must form one 8-connected group
    seen = {pos[0]}
    stack = [pos[0]]
    pset = set(pos)
    while stack:
        y, x = stack.pop()
        for q in pset:
            if q not in seen and max(abs(q[0] - y), abs(q[1] - x)) == 1:
                seen.add(q)
                stack.append(q)
    if len(seen) != len(pset):
        return False
    # background 4-neighbours must be 4-connected within the ring
    bg = {_OFFSETS[i] for i in range(8) if not n[i]}
    four = [q for q in bg if abs(q[0]) + abs(q[1]) == 1]
    if not four:
        return False
    seen = {four[0]}
    stack = [four[0]]
    while stack:
        y, x = stack.pop()
        for q in bg:
            if q not in seen and abs(q[0] - y) + abs(q[1] - x) == 1:
                seen.add(q)
                stack.append(q)
    return all(q in seen for q in four)


def _build_luts():
    zs1 = np.zeros(256, dtype=bool)
    zs2 = np.zeros(256, dtype=bool)
    corner = np.zeros(256, dtype=bool)
    for code in range(256):
        n = _bits(code)
        p2, p3, p4, p5, p6, p7, p8, p9 = n
        b = sum(n)
        a = sum(1 for i in range(8) if n[i] == 0 and n[(i + 1) % 8] == 1)
        base = 2 <= b <= 6 and a == 1
        zs1[code] = base and p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
        zs2[code] = base and p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
        # staircase pixel: two orthogonal 4-neighbours already joined diagonally
        orth = (p2 and p4) or (p4 and p6) or (p6 and p8) or (p8 and p2)
        corner[code] = bool(orth) and b >= 2 and _is_simple(n)
    return zs1, zs2, corner


_ZS1, _ZS2, _CORNER = _build_luts()


def _codes(padded_flat: np.ndarray, idx: np.ndarray, stride: int) -> np.ndarray:
    code = np.zeros(idx.shape, dtype=np.uint8)
    for bit, (dy, dx) in enumerate(_OFFSETS):
        code |= padded_flat[idx + dy * stride + dx] << bit
    return code


def _parity(idx: np.ndarray, stride: int) -> np.ndarray:
    return (idx // stride % 2) * 2 + (idx % stride % 2)


def _delete_pass(flat: np.ndarray, idx: np.ndarray, stride: int, lut: np.ndarray) -> int:
    """Delete lut-matching pixels among ``idx``. Candidates are taken from the
    state at entry; deletion then proceeds over four pixel subfields (no two
    pixels of a subfield are 8-adjacent) re-checking each candidate, which
    makes the parallel step equivalent to a sequential one."""
    cand = idx[lut[_codes(flat, idx, stride)]]
    if cand.size == 0:
        return 0
    removed = 0
    par = _parity(cand, stride)
    for s in range(4):
        sub = cand[par == s]
        if sub.size == 0:
            continue
        sub = sub[lut[_codes(flat, sub, stride)]]
        flat[sub] = 0
        removed += sub.size
    return removed


def skeletonize(mask: np.ndarray) -> np.ndarray:
    """Zhang-Suen thinning to a one-pixel-wide skeleton.

    The two directional sub-iterations follow the classic rules; deletions
    are serialized over pixel subfields so no component is disconnected or
    erased (plain Zhang-Suen deletes 2x2 squares outright). A final pass
    removes staircase pixels so every curve pixel has exactly two 8-neighbours.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    padded = np.pad(mask, 1).astype(np.uint8)
    stride = w + 2
    flat = padded.ravel()
    while True:
        idx = np.flatnonzero(flat)
        removed = _delete_pass(flat, idx, stride, _ZS1)
        idx = np.flatnonzero(flat)
        removed += _delete_pass(flat, idx, stride, _ZS2)
        if removed == 0:
            break
    while True:
        idx = np.flatnonzero(flat)
        if _delete_pass(flat, idx, stride, _CORNER) == 0:
            break
    return flat.reshape(h + 2, w + 2)[1:-1, 1:-1].astype(bool)


def neighbour_count(mask: np.ndarray) -> np.ndarray:
    """Number of 8-neighbours of every pixel (background pixels included)."""
    m = np.pad(np.asarray(mask, dtype=np.uint8), 1)
    h, w = np.shape(mask)
    total = np.zeros((h, w), dtype=np.uint8)
    for dy, dx in _OFFSETS:
        total += m[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    return total


def otsu_threshold(img: np.ndarray) -> int:
    """Otsu's global threshold; used only as a baseline in tests."""
    hist = np.bincount(_as_gray(img).ravel(), minlength=256).astype(np.float64)
    p = hist / hist.sum()
    omega = np.cumsum(p)
    mu = np.cumsum(p * np.arange(256))
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mu[-1] * omega - mu) ** 2 / (omega * (1 - omega))
    between[~np.isfinite(between)] = 0
    return int(np.argmax(between))
