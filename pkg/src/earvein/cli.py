"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 segmentation or
vein extraction failure, 3 file input/output error.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, UnidentifiedImageError

from . import config as config_mod
from . import gallery as gallery_mod
from . import synth
from .classify import (KINDS, Dataset, evaluate, load_model, predict, save_model,
                       stratified_split, train)
from .errors import PipelineError
from .pipeline import Extraction, extract

EXIT_OK, EXIT_USAGE, EXIT_PIPELINE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- image and file helpers ---------------------------------------------------

def load_image(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (FileNotFoundError, IsADirectoryError, PermissionError, UnidentifiedImageError) as e:
        raise OSError(f"cannot read image {path}: {e}") from e


def load_mask(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 127


def save_mask(path: Path, mask: np.ndarray) -> None:
    Image.fromarray(mask.astype(np.uint8) * 255).save(path)


def minutiae_overlay(ex: Extraction) -> Image.Image:
    """Skeleton in white over the ROI, bifurcations red, endpoints green."""
    base = ex.roi.roi_image.copy()
    sk = ex.minutiae.stages["skeleton"] if ex.minutiae.stages else None
    if sk is not None:
        base[sk] = 255
    im = Image.fromarray(base)
    d = ImageDraw.Draw(im)
    r = max(3, base.shape[1] // 300)
    for (x, y), col in [(p, (255, 0, 0)) for p in ex.minutiae.bifurcations] + \
                       [(p, (0, 255, 0)) for p in ex.minutiae.endpoints]:
        d.ellipse([x - r, y - r, x + r, y + r], outline=col, width=max(1, r // 2))
    return im


def write_roi_stages(out: Path, ex_roi) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for key in ("m1", "m3", "m4"):
        if ex_roi.stages and key in ex_roi.stages:
            save_mask(out / f"{key}.pgm", ex_roi.stages[key])
            names.append(f"{key}.pgm")
    save_mask(out / "mask.pgm", ex_roi.mask)
    Image.fromarray(ex_roi.roi_image).save(out / "roi.png")
    return names + ["mask.pgm", "roi.png"]


def write_vein_stages(out: Path, ex: Extraction) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    st = ex.minutiae.stages or {}
    names = []
    if "enhanced" in st:
        Image.fromarray(st["enhanced"]).save(out / "enhanced.png")
        names.append("enhanced.png")
    for key in ("binary", "clean", "merged", "skeleton"):
        if key in st:
            save_mask(out / f"{key}.pgm", st[key])
            names.append(f"{key}.pgm")
    minutiae_overlay(ex).save(out / "minutiae.png")
    return names + ["minutiae.png"]


def write_debug(out: Path | None, ex: Extraction) -> None:
    if out is not None:
        write_roi_stages(out, ex.roi)
        write_vein_stages(out, ex)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    return float(np.count_nonzero(a & b) / union) if union else 1.0


def emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=2) if args.json else text)


# --- dataset assembly ---------------------------------------------------------

def _extract_row(job):
    path, pig, source, cfg = job
    try:
        return extract(load_image(path), cfg.roi, cfg.vein, pig_id=pig, source=source).features, None
    except PipelineError as e:
        return None, f"{source}: {e}"


def dataset_from_input(path: str, cfg: config_mod.Config) -> tuple[Dataset, list[str]]:
    """A manifest (``.json``) is run through the pipeline image by image; a
    gallery (``.jsonl``) already holds feature vectors."""
    p = Path(path)
    if not p.is_file():
        raise OSError(f"no such file: {p}")
    if p.suffix == ".jsonl":
        return gallery_mod.load(p).dataset(), []
    try:
        root, rows = synth.load_manifest(p)
        jobs = [(root / r["path"], r["pig_id"], r["path"], cfg) for r in rows]
    except (KeyError, TypeError) as e:
        raise OSError(f"{p}: not a herd manifest ({e})") from e
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_extract_row, jobs, chunksize=8))
    else:
        results = [_extract_row(j) for j in jobs]
    vecs = [v for v, _ in results if v is not None]
    failures = [err for _, err in results if err is not None]
    if not vecs:
        raise PipelineError(f"no usable image in {p} ({len(failures)} failed)")
    return Dataset.from_vectors(vecs), failures


# --- commands -----------------------------------------------------------------

def cmd_segment(args, cfg):
    from . import roiseg
    img = load_image(args.image)
    roi = roiseg.extract_roi(img, cfg.roi, keep_stages=True)
    out = Path(args.out_dir)
    files = write_roi_stages(out, roi)
    th = roi.thresholds
    payload = {"image": args.image, "status": roi.status, "area_fraction": float(roi.mask.mean()),
               "thresholds": {"t_red": th.t_red, "t_rg": th.t_rg, "t_rb": th.t_rb},
               "red_mean": roi.stats.mean, "red_std": roi.stats.stddev,
               "contrast_tier": roiseg.contrast_tier(roi.stats),
               "brightness_branch": roiseg.brightness_branch(roi.stats),
               "files": [str(out / f) for f in files]}
    truth = _truth_mask(args)
    if truth is not None:
        if truth.shape != roi.mask.shape:
            raise UsageError("ground-truth mask size differs from the image")
        payload["iou"] = iou(roi.mask, truth)
    text = (f"{args.image}: ROI {roi.status}, {payload['area_fraction']:.3f} of frame, "
            f"t_red={th.t_red:.2f} t_rg={th.t_rg:.3f} t_rb={th.t_rb:.3f}")
    if "iou" in payload:
        text += f"\nIoU vs ground truth: {payload['iou']:.4f}"
    emit(args, payload, text)
    return EXIT_OK if roi.status == "ok" else EXIT_PIPELINE


def _truth_mask(args) -> np.ndarray | None:
    if args.truth:
        return load_mask(args.truth)
    if args.manifest:
        root, rows = synth.load_manifest(args.manifest)
        name = Path(args.image).name
        for r in rows:
            if Path(r["path"]).name == name and "ear_mask" in r:
                return load_mask(root / r["ear_mask"])
        raise UsageError(f"{name} is not listed in {args.manifest}")
    return None


def cmd_veins(args, cfg):
    ex = extract(load_image(args.image), cfg.roi, cfg.vein, keep_stages=True, source=args.image)
    out = Path(args.out_dir)
    files = write_roi_stages(out, ex.roi) + write_vein_stages(out, ex)
    m = ex.minutiae
    payload = {"image": args.image, "n_bifurcations": len(m.bifurcations),
               "n_endpoints": len(m.endpoints), "n_samples": len(m.samples),
               "bifurcations": m.bifurcations, "endpoints": m.endpoints,
               "timing": ex.timing, "files": [str(out / f) for f in files]}
    emit(args, payload, f"{args.image}: {len(m.bifurcations)} bifurcations, "
                        f"{len(m.endpoints)} endpoints, {len(m.samples)} samples")
    return EXIT_OK


def cmd_features(args, cfg):
    debug = Path(args.debug_dir) if args.debug_dir else None
    ex = extract(load_image(args.image), cfg.roi, cfg.vein, pig_id=args.pig_id,
                 source=args.image, keep_stages=debug is not None)
    write_debug(debug, ex)
    print(ex.features.to_json())
    return EXIT_OK


def cmd_synth(args, cfg):
    rc = synth.HIGH_NOISE if args.noise == "high" else synth.LOW_NOISE
    if args.lighting:
        rc = synth.lighting(args.lighting, rc)
    if args.full_res:
        rc = synth.full_res(rc)
    t0 = time.perf_counter()
    manifest = synth.generate_herd(args.out_dir, args.pigs, args.images, rc, cfg.seed)
    n = args.pigs * args.images
    emit(args, {"manifest": str(manifest), "images": n, "seconds": time.perf_counter() - t0},
         f"wrote {n} images and {manifest}")
    return EXIT_OK


def _table(reports) -> str:
    lines = [f"{'model':<6} {'accuracy':>9} {'correct':>8} {'errors':>7}"]
    for r in reports:
        lines.append(f"{r.kind:<6} {100 * r.accuracy:>8.2f}% {int(np.trace(r.confusion)):>5}/{r.n_test:<3}"
                     f"{len(r.errors):>6}")
    return "\n".join(lines)


def cmd_train(args, cfg):
    data, failures = dataset_from_input(args.input, cfg)
    tr, te = stratified_split(data, cfg.train_frac, cfg.seed)
    kinds = list(KINDS) if args.all else [args.kind]
    out = Path(args.out)
    if args.all:
        out.mkdir(parents=True, exist_ok=True)
    reports, saved = [], []
    for kind in kinds:
        t0 = time.perf_counter()
        model = train(kind, tr, cfg.train, cfg.seed)
        model.train_config.update({"train_frac": cfg.train_frac, "split_seed": cfg.seed})
        fit_s = time.perf_counter() - t0
        rep = evaluate(model, te)
        rep.timing["train_s"] = fit_s
        reports.append(rep)
        dest = out / f"model_{kind}.json" if args.all else out
        save_model(model, dest)
        saved.append(str(dest))
    payload = {"n_train": len(tr), "n_test": len(te), "n_failed": len(failures),
               "failures": failures, "models": saved, "reports": [r.to_dict() for r in reports]}
    text = f"split {len(tr)} train / {len(te)} test"
    if failures:
        text += f" ({len(failures)} images skipped)"
    text += "\n" + _table(reports) + "\nsaved " + ", ".join(saved)
    emit(args, payload, text)
    return EXIT_OK


def cmd_evaluate(args, cfg):
    model = _read_model(args.model)
    data, failures = dataset_from_input(args.input, cfg)
    if args.split == "test":
        frac = model.train_config.get("train_frac", cfg.train_frac)
        seed = model.train_config.get("split_seed", cfg.seed)
        _, data = stratified_split(data, frac, seed)
    rep = evaluate(model, data)
    payload = rep.to_dict()
    payload["n_failed"] = len(failures)
    text = _table([rep]) + "\n\nconfusion (rows true, columns predicted)\n" + rep.confusion_table()
    if rep.errors:
        text += "\n\nmisclassified:\n" + "\n".join(f"  {e.source}: {e.true} -> {e.predicted}"
                                                   for e in rep.errors)
    emit(args, payload, text)
    return EXIT_OK


def _existing(path: str) -> str:
    if not Path(path).is_file():
        raise OSError(f"no such file: {path}")
    return path


def _read_model(path: str):
    try:
        return load_model(_existing(path))
    except (ValueError, KeyError, TypeError) as e:
        raise OSError(f"unreadable model file {path}: {e}") from e


def cmd_enroll(args, cfg):
    path = Path(args.gallery)
    g = gallery_mod.load(path) if path.exists() else gallery_mod.Gallery()
    before = len(g)
    for img_path in args.images:
        gallery_mod.enroll(g, args.pig_id, load_image(img_path), img_path, cfg.roi, cfg.vein)
    gallery_mod.save(g, path)
    emit(args, {"gallery": str(path), "added": len(g) - before, "records": len(g)},
         f"enrolled {len(g) - before} image(s) as {args.pig_id}; {len(g)} records in {path}")
    return EXIT_OK


def cmd_identify(args, cfg):
    g = gallery_mod.load(_existing(args.gallery))
    if args.model:
        model = _read_model(args.model)
    else:
        if len(g.pig_ids) < 2:
            raise UsageError("identification without --model needs at least two enrolled pigs")
        model = train("svm", g.dataset(), cfg.train, cfg.seed)
    res = gallery_mod.identify(g, model, load_image(args.image), args.image, cfg.roi, cfg.vein)
    top = res.ranked[:args.top]
    emit(args, {"image": args.image, "best": res.best, "ranked": res.ranked,
                "timing": res.timing},
         "\n".join(f"{i + 1:>2}. {pid}  {s:.4f}" for i, (pid, s) in enumerate(top))
         + f"\ntotal {res.timing['total_s']:.3f} s")
    return EXIT_OK


def _bench_model(cfg):
    """SVM trained on a small herd at the reference size. Features are
    resolution independent, so it stands in for a deployed model."""
    vecs = []
    for it in synth.iter_herd(20, 4, synth.LOW_NOISE, cfg.seed):
        try:
            vecs.append(extract(it.image, cfg.roi, cfg.vein, pig_id=it.pig_id).features)
        except PipelineError:
            pass
    return train("svm", Dataset.from_vectors(vecs), cfg.train, cfg.seed)


def cmd_bench(args, cfg):
    if args.image:
        img = load_image(args.image)
        label = args.image
    else:
        rc = synth.full_res() if args.full_res else synth.LOW_NOISE
        img, _ = synth.render(synth.make_template(cfg.seed), rc, 0)
        label = f"synthetic {img.shape[1]}x{img.shape[0]}"
    runs, feats = [], []
    for _ in range(args.n_iter):
        ex = extract(img, cfg.roi, cfg.vein)
        runs.append(dict(ex.timing))
        feats.append(ex.features)
    # the model is built only after the image is known to be usable
    model = _read_model(args.model) if args.model else _bench_model(cfg)
    for t, fv in zip(runs, feats):
        t0 = time.perf_counter()
        predict(model, fv)
        t["classify_s"] = time.perf_counter() - t0
        t["total_s"] = t["extract_s"] + t["classify_s"]
    stats = {}
    for key in runs[0]:
        vals = [r[key] for r in runs]
        stats[key] = {"mean": statistics.fmean(vals), "min": min(vals), "max": max(vals),
                      "std": statistics.pstdev(vals)}
    payload = {"image": label, "width": int(img.shape[1]), "height": int(img.shape[0]),
               "n_iter": args.n_iter, "stages": stats}
    lines = [f"{label}, {args.n_iter} run(s)", f"{'stage':<12}{'mean s':>9}{'min s':>9}{'max s':>9}"]
    for key, s in stats.items():
        lines.append(f"{key[:-2]:<12}{s['mean']:>9.3f}{s['min']:>9.3f}{s['max']:>9.3f}")
    emit(args, payload, "\n".join(lines))
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("shared options")
    g.add_argument("--config", help="TOML file with [roi], [vein] and [train] tables")
    g.add_argument("--seed", type=int)
    g.add_argument("--debug-dir", help="write intermediate stage images here")
    g.add_argument("--json", action="store_true", help="machine-readable output")
    g.add_argument("--workers", type=int, help="processes for batch feature extraction")
    g.add_argument("--roi-percentile", type=float)
    g.add_argument("--min-object-size", type=int)
    g.add_argument("--major-components", type=int)
    g.add_argument("--svm-c", type=float)
    g.add_argument("--svm-gamma", type=_gamma)
    g.add_argument("--rf-trees", type=int)
    g.add_argument("--knn-k", type=int)
    g.add_argument("--lr-l2", type=float)
    g.add_argument("--train-frac", type=float)

    p = _Parser(prog="earvein", description="Pig identification from ear vein images.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("segment", parents=[common], help="segment the inner ear")
    s.add_argument("image")
    s.add_argument("--out-dir", default="segment_out")
    s.add_argument("--truth", help="ground-truth ear mask image for an IoU report")
    s.add_argument("--manifest", help="synthetic herd manifest holding the ground truth")
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("veins", parents=[common], help="extract the vein skeleton and minutiae")
    s.add_argument("image")
    s.add_argument("--out-dir", default="veins_out")
    s.set_defaults(func=cmd_veins)

    s = sub.add_parser("features", parents=[common], help="print the 68-value feature vector")
    s.add_argument("image")
    s.add_argument("--pig-id")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("synth", parents=[common], help="render a synthetic herd")
    s.add_argument("out_dir")
    s.add_argument("--pigs", type=int, default=20)
    s.add_argument("--images", type=int, default=40)
    s.add_argument("--noise", choices=["low", "high"], default="low")
    s.add_argument("--lighting", choices=sorted(synth.LIGHTING))
    s.add_argument("--full-res", action="store_true", help="4032x3024 instead of 1024x768")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", parents=[common], help="split, train and report")
    s.add_argument("input", help="herd manifest.json or gallery.jsonl")
    s.add_argument("--kind", choices=KINDS, default="svm")
    s.add_argument("--all", action="store_true", help="train every model kind")
    s.add_argument("--out", default="model.json", help="model file, or a directory with --all")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", parents=[common], help="score a model on a dataset")
    s.add_argument("model")
    s.add_argument("input", help="herd manifest.json or gallery.jsonl")
    s.add_argument("--split", choices=["test", "all"], default="test",
                   help="'test' re-derives the held-out part of the training split")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("enroll", parents=[common], help="add images of a pig to a gallery")
    s.add_argument("gallery")
    s.add_argument("pig_id")
    s.add_argument("images", nargs="+")
    s.set_defaults(func=cmd_enroll)

    s = sub.add_parser("identify", parents=[common], help="rank enrolled pigs for an image")
    s.add_argument("gallery")
    s.add_argument("image")
    s.add_argument("--model", help="trained model; default trains an SVM on the gallery")
    s.add_argument("--top", type=int, default=5)
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("bench", parents=[common], help="per-stage timing")
    s.add_argument("image", nargs="?", help="default renders a synthetic image")
    s.add_argument("--n-iter", type=int, default=3)
    s.add_argument("--full-res", action="store_true")
    s.add_argument("--model")
    s.set_defaults(func=cmd_bench)
    return p


def _gamma(text: str):
    if text == "scale":
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'scale' or a positive number")
    if v <= 0:
        raise argparse.ArgumentTypeError("gamma must be positive")
    return v


def resolve_config(args) -> config_mod.Config:
    cfg = config_mod.load(args.config) if args.config else config_mod.Config()
    flags = {k: getattr(args, k, None) for k in config_mod.FLAGS}
    return config_mod.override(cfg, **flags)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config and not Path(args.config).is_file():
            raise OSError(f"no such config file: {args.config}")
        cfg = resolve_config(args)
        if getattr(args, "n_iter", 1) < 1 or getattr(args, "top", 1) < 1:
            raise UsageError("counts must be >= 1")
        return args.func(args, cfg)
    except PipelineError as e:
        print(f"earvein: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_PIPELINE
    except (OSError, json.JSONDecodeError, gallery_mod.GalleryFormatError) as e:
        print(f"earvein: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError) as e:
        print(f"earvein: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
