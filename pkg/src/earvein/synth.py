"""Synthetic backlit ear images with known ear region and vein tree.

Geometry is generated in reference pixel units of a 1024x768 frame and
scaled at render time, so one template renders at any 4:3 resolution.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage as ndi

REF_W, REF_H = 1024, 768


@dataclass(frozen=True)
class Branch:
    points: tuple[tuple[float, float], ...]   # reference-pixel polyline
    width: float                              # reference-pixel stroke width


@dataclass(frozen=True)
class PigTemplate:
    seed: int
    center: tuple[float, float]
    axes: tuple[float, float]                 # semi-axes (x, y) in reference pixels
    tilt: float                               # radians
    harmonics: tuple[tuple[int, float, float], ...]  # (order, amplitude, phase)
    branches: tuple[Branch, ...]
    n_bifurcations: int
    n_endpoints: int

    def outline(self, n: int = 360) -> np.ndarray:
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        rad = np.ones_like(t)
        for k, amp, ph in self.harmonics:
            rad += amp * np.cos(k * t + ph)
        x = self.axes[0] * rad * np.cos(t)
        y = self.axes[1] * rad * np.sin(t)
        c, s = math.cos(self.tilt), math.sin(self.tilt)
        return np.stack([self.center[0] + c * x - s * y,
                         self.center[1] + s * x + c * y], axis=1)

    def signature(self) -> tuple:
        """Topology/shape encoding used to compare templates."""
        return tuple((len(b.points), round(b.points[0][0]), round(b.points[0][1]),
                      round(b.points[-1][0]), round(b.points[-1][1])) for b in self.branches)


@dataclass(frozen=True)
class RenderConfig:
    width: int = REF_W
    height: int = REF_H
    noise_sigma: float = 2.0
    brightness_jitter: float = 0.05   # uniform multiplicative range +-
    rotation_jitter: float = 1.0      # degrees, uniform +-
    background_level: float = 12.0    # used when background_rgb is None
    ear_rgb: tuple[float, float, float] = (150.0, 38.0, 34.0)
    background_rgb: tuple[float, float, float] | None = None
    vein_depth: float = 0.45          # fractional red attenuation at vein centre
    tissue_texture: float = 0.15      # log-normal spread of green/blue absorbance
    edge_blur: float = 1.5

    def background(self) -> tuple[float, float, float]:
        if self.background_rgb is not None:
            return self.background_rgb
        lvl = self.background_level
        return (lvl * 0.5, lvl, lvl * 1.1)


# Lighting presets spanning every red-contrast tier and brightness branch of
# the segmentation thresholds. Values are (ear_rgb, background_rgb).
LIGHTING = {
    "dark_flat": ((26.0, 6.5, 6.5), (2.0, 9.0, 10.0)),
    "dark": ((36.0, 9.0, 9.0), (1.5, 8.0, 9.0)),
    "medium_flat": ((70.0, 18.0, 17.0), (8.0, 10.0, 12.0)),
    "default": ((150.0, 38.0, 34.0), (6.0, 12.0, 13.0)),
    "medium_strong": ((225.0, 56.0, 50.0), (4.0, 8.0, 9.0)),
    "bright_flat": ((110.0, 30.0, 28.0), (55.0, 55.0, 58.0)),
    "bright": ((170.0, 48.0, 44.0), (40.0, 45.0, 48.0)),
    "bright_strong": ((240.0, 68.0, 60.0), (28.0, 32.0, 34.0)),
}

LOW_NOISE = RenderConfig()
HIGH_NOISE = RenderConfig(noise_sigma=5.0, brightness_jitter=0.15, rotation_jitter=3.0,
                          background_level=20.0)


def lighting(name: str, base: RenderConfig = LOW_NOISE) -> RenderConfig:
    ear, bg = LIGHTING[name]
    return replace(base, ear_rgb=ear, background_rgb=bg)


def full_res(cfg: RenderConfig = LOW_NOISE) -> RenderConfig:
    return replace(cfg, width=4032, height=3024)


def _derive(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) & 0xFFFFFFFF for k in keys]))


# --- template construction ---------------------------------------------------

class _Grower:
    step = 7.0
    margin = 24.0       # minimum distance from the ear outline
    clearance = 22.0    # minimum distance between unrelated branches

    def __init__(self, rng: np.random.Generator, inside):
        self.rng = rng
        self.inside = inside
        self.branches: list[Branch] = []
        self.n_bif = 0
        self.n_leaf = 0
        self._pts: list[np.ndarray] = []          # per-branch point arrays

    def _clear(self, p: np.ndarray, skip: set[int]) -> bool:
        for i, pts in enumerate(self._pts):
            if i in skip:
                continue
            if np.min(np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1])) < self.clearance:
                return False
        return True

    def _trace(self, start, heading, length, skip: set[int]):
        pts = [np.asarray(start, dtype=float)]
        curv = self.rng.normal(0, 0.02)
        n = int(length / self.step)
        for i in range(n):
            curv += self.rng.normal(0, 0.01)
            curv = float(np.clip(curv, -0.04, 0.04))
            heading += curv
            p = pts[-1] + self.step * np.array([math.cos(heading), math.sin(heading)])
            if not self.inside(p):
                break
            # siblings and parent may crowd the first few steps
            if i >= 4 and not self._clear(p, skip):
                break
            pts.append(p)
        return np.array(pts), heading

    def grow(self, start, heading, length, width, depth, parent: int | None) -> bool:
        skip = {parent} if parent is not None else set()
        pts, heading = self._trace(start, heading, length, skip)
        if len(pts) * self.step < 45:
            return False
        me = len(self._pts)
        self._pts.append(pts)
        self.branches.append(Branch(tuple(map(tuple, pts.round(2))), width))
        kids = 0
        if depth > 0:
            spread = self.rng.uniform(0.45, 0.8)
            skew = self.rng.normal(0, 0.15)
            for side in (-1, 1):
                kids += self.grow(pts[-1], heading + side * spread + skew,
                                  length * self.rng.uniform(0.65, 0.9),
                                  max(4.0, width - 1.0), depth - 1, me)
        if kids == 2:
            self.n_bif += 1
        elif kids == 0:
            self.n_leaf += 1
        return True


def make_template(seed: int) -> PigTemplate:
    """Deterministic ear outline plus branching vein tree for one pig."""
    for attempt in range(100):
        rng = _derive(seed, attempt)
        center = (REF_W / 2 + rng.uniform(-30, 30), REF_H / 2 + rng.uniform(-20, 20))
        axes = (rng.uniform(215, 250), rng.uniform(210, 240))
        tilt = rng.uniform(-0.25, 0.25)
        harmonics = tuple((k, float(rng.uniform(0.01, 0.05)), float(rng.uniform(0, 2 * np.pi)))
                          for k in (2, 3, 4))
        proto = PigTemplate(seed, center, axes, tilt, harmonics, (), 0, 0)
        outline = proto.outline(720)
        path = _polygon_test(outline)

        def inside(p, _path=path, _outline=outline):
            if not _path(p):
                return False
            d = np.min(np.hypot(_outline[:, 0] - p[0], _outline[:, 1] - p[1]))
            return d >= _Grower.margin

        g = _Grower(rng, inside)
        up = -math.pi / 2 + tilt + rng.normal(0, 0.25)
        c, s = math.cos(tilt), math.sin(tilt)
        oy = axes[1] * 0.78
        root = (center[0] - s * oy + rng.uniform(-40, 40), center[1] + c * oy)
        depth = int(rng.integers(2, 4))
        if not inside(np.array(root)):
            continue
        if not g.grow(root, up, rng.uniform(150, 210), 6.0, depth, None):
            continue
        if g.n_bif < 2 or not 2 <= g.n_bif <= 6:
            continue
        return PigTemplate(seed=seed, center=center, axes=axes, tilt=tilt, harmonics=harmonics,
                           branches=tuple(g.branches), n_bifurcations=g.n_bif,
                           n_endpoints=g.n_leaf + 1)
    raise RuntimeError(f"could not build a vein tree for seed {seed}")


def _polygon_test(poly: np.ndarray):
    from matplotlib.path import Path as MplPath

    path = MplPath(poly)
    return lambda p: bool(path.contains_point((float(p[0]), float(p[1]))))


# --- rendering ----------------------------------------------------------------

@dataclass
class GroundTruth:
    ear_mask: np.ndarray
    n_bifurcations: int
    n_endpoints: int
    rotation: float = 0.0
    brightness: float = 1.0


_NOISE_BANK: dict[tuple[int, int], np.ndarray] = {}
_BANK_MARGIN = 61


def _add_noise(out: np.ndarray, sigma: float, rng: np.random.Generator) -> None:
    """Add Gaussian noise of std ``sigma`` to an ``(h, w, 3)`` float frame.

    Drawing fresh normals dominates render time, so each channel takes a
    random window of one fixed seeded field with a random sign; within a
    channel samples stay independent standard normals.
    """
    h, w = out.shape[:2]
    bank = _NOISE_BANK.get((h, w))
    if bank is None:
        bank = np.random.default_rng(20240611).standard_normal(
            (h + _BANK_MARGIN, w + _BANK_MARGIN), dtype=np.float32)
        _NOISE_BANK[(h, w)] = bank
    for c in range(3):
        dy, dx = rng.integers(0, _BANK_MARGIN + 1, size=2)
        scale = np.float32(sigma if rng.random() < 0.5 else -sigma)
        out[..., c] += scale * bank[dy:dy + h, dx:dx + w]


def _transform(points: np.ndarray, t: PigTemplate, angle: float, sx: float, sy: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    d = points - np.asarray(t.center)
    x = t.center[0] + c * d[:, 0] - s * d[:, 1]
    y = t.center[1] + s * d[:, 0] + c * d[:, 1]
    return np.stack([x * sx, y * sy], axis=1)


def render(t: PigTemplate, cfg: RenderConfig = LOW_NOISE, instance_seed: int = 0):
    """Render one photo of ``t``. Returns ``(rgb uint8 (H, W, 3), GroundTruth)``."""
    if cfg.width <= 0 or cfg.height <= 0 or cfg.noise_sigma < 0:
        raise ValueError("invalid render config")
    rng = _derive(t.seed, instance_seed, 7)
    w, h = cfg.width, cfg.height
    sx, sy = w / REF_W, h / REF_H
    scale = math.sqrt(sx * sy)
    angle = math.radians(rng.uniform(-cfg.rotation_jitter, cfg.rotation_jitter))
    gain = 1.0 + rng.uniform(-cfg.brightness_jitter, cfg.brightness_jitter)

    outline = _transform(t.outline(720), t, angle, sx, sy)
    ear_img = Image.new("L", (w, h), 0)
    ImageDraw.Draw(ear_img).polygon([tuple(p) for p in outline], fill=255)
    ear = np.asarray(ear_img) > 0

    vein_img = Image.new("L", (w, h), 0)
    draw = ImageDraw.Draw(vein_img)
    for br in t.branches:
        pts = _transform(np.asarray(br.points), t, angle, sx, sy)
        width = br.width * scale
        draw.line([tuple(p) for p in pts], fill=255, width=max(1, int(round(width))), joint="curve")
        r = width / 2
        for x, y in (pts[0], pts[-1]):
            draw.ellipse([x - r, y - r, x + r, y + r], fill=255)
    # all tissue work happens inside the ear's bounding box
    pad = int(math.ceil(4 * max(cfg.edge_blur, 1.0) * scale)) + 2
    x0 = max(int(outline[:, 0].min()) - pad, 0)
    x1 = min(int(outline[:, 0].max()) + pad + 1, w)
    y0 = max(int(outline[:, 1].min()) - pad, 0)
    y1 = min(int(outline[:, 1].max()) + pad + 1, h)
    box = (slice(y0, y1), slice(x0, x1))
    bh, bw = y1 - y0, x1 - x0

    vein = ndi.gaussian_filter(np.asarray(vein_img, dtype=np.float32)[box] / 255.0, 0.8 * scale)
    alpha = ndi.gaussian_filter(ear[box].astype(np.float32), cfg.edge_blur * scale)
    ear_rgb = np.asarray(cfg.ear_rgb, dtype=np.float32)
    bg_rgb = np.asarray(cfg.background(), dtype=np.float32)

    # backlight falls off towards the ear rim
    yy, xx = np.ogrid[y0:y1, x0:x1]
    cx, cy = t.center[0] * sx, t.center[1] * sy
    rr = ((xx - cx) / np.float32(t.axes[0] * sx)) ** 2 + ((yy - cy) / np.float32(t.axes[1] * sy)) ** 2
    falloff = (1.0 - 0.2 * np.clip(rr, 0, 1.5)).astype(np.float32)

    tex = np.exp(np.float32(cfg.tissue_texture) * rng.standard_normal((bh, bw), dtype=np.float32))
    red = falloff * (1.0 - np.float32(cfg.vein_depth) * vein)
    gb = falloff * tex * (1.0 - np.float32(0.5 * cfg.vein_depth) * vein)

    out = np.empty((h, w, 3), dtype=np.float32)
    out[:] = bg_rgb * gain
    for c, plane in ((0, red), (1, gb), (2, gb)):
        tissue = ear_rgb[c] * plane
        out[y0:y1, x0:x1, c] = gain * (alpha * tissue + (1 - alpha) * bg_rgb[c])
    if cfg.noise_sigma > 0:
        _add_noise(out, cfg.noise_sigma, rng)
    np.clip(out, 0, 255, out=out)
    out += 0.5
    img = out.astype(np.uint8)
    gt = GroundTruth(ear_mask=ear, n_bifurcations=t.n_bifurcations,
                     n_endpoints=t.n_endpoints, rotation=angle, brightness=gain)
    return img, gt


# --- herds --------------------------------------------------------------------

def pig_seed(herd_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([herd_seed, index]).generate_state(1)[0])


def pig_id(index: int) -> str:
    return f"pig{index:02d}"


@dataclass
class HerdItem:
    pig_id: str
    image: np.ndarray
    truth: GroundTruth
    seed: int
    instance: int


def iter_herd(n_pigs: int, images_each: int, cfg: RenderConfig = LOW_NOISE, seed: int = 0):
    """Yield every image of a herd in (pig, instance) order without touching disk."""
    if n_pigs < 2:
        raise ValueError("a herd needs at least two pigs")
    for i in range(n_pigs):
        tseed = pig_seed(seed, i)
        t = make_template(tseed)
        for k in range(images_each):
            img, gt = render(t, cfg, k)
            yield HerdItem(pig_id(i), img, gt, tseed, k)


def generate_herd(out_dir: str | Path, n_pigs: int, images_each: int,
                  cfg: RenderConfig = LOW_NOISE, seed: int = 0) -> Path:
    """Write a PNG per image plus ``manifest.json``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for item in iter_herd(n_pigs, images_each, cfg, seed):
        name = f"{item.pig_id}_{item.instance:03d}.png"
        Image.fromarray(item.image).save(out / name, compress_level=1)
        Image.fromarray(item.truth.ear_mask.astype(np.uint8) * 255).save(
            out / f"{item.pig_id}_{item.instance:03d}_ear.png", compress_level=1)
        rows.append({"pig_id": item.pig_id, "path": name,
                     "n_endpoints": item.truth.n_endpoints,
                     "n_bifurcations": item.truth.n_bifurcations,
                     "seed": item.seed, "instance": item.instance,
                     "ear_mask": f"{item.pig_id}_{item.instance:03d}_ear.png"})
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"render": asdict(cfg), "herd_seed": seed, "images": rows},
                                   indent=1))
    return manifest


def load_manifest(path: str | Path) -> tuple[Path, list[dict]]:
    """Return ``(image_root, rows)`` for a manifest written by ``generate_herd``."""
    path = Path(path)
    data = json.loads(path.read_text())
    rows = data["images"] if isinstance(data, dict) else data
    return path.parent, rows
