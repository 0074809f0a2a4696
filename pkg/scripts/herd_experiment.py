"""Train and score all four classifiers on synthetic herds.

Renders a herd per noise level, extracts features, makes the stratified
80/20 split and prints accuracy per model, plus the RF out-of-bag score.
"""

import argparse
import json
import time

from earvein import classify, pipeline, synth
from earvein.errors import PipelineError


def run(cfg, pigs, images, seed, split_seed):
    vecs, failed = [], 0
    t0 = time.perf_counter()
    for it in synth.iter_herd(pigs, images, cfg, seed):
        try:
            vecs.append(pipeline.extract(it.image, pig_id=it.pig_id,
                                         source=f"{it.pig_id}_{it.instance:03d}").features)
        except PipelineError:
            failed += 1
    extract_s = time.perf_counter() - t0
    tr, te = classify.stratified_split(classify.Dataset.from_vectors(vecs), 0.8, split_seed)
    rows = []
    for kind in classify.KINDS:
        t1 = time.perf_counter()
        model = classify.train(kind, tr, seed=split_seed)
        rep = classify.evaluate(model, te)
        rows.append({"kind": kind, "accuracy": rep.accuracy, "errors": len(rep.errors),
                     "train_s": time.perf_counter() - t1,
                     "oob": getattr(model.params, "oob_accuracy", None)})
    return {"n_train": len(tr), "n_test": len(te), "failed": failed,
            "extract_s": extract_s, "models": rows}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pigs", type=int, default=20)
    ap.add_argument("--images", type=int, default=40)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--split-seed", type=int, default=0)
    ap.add_argument("--noise", choices=["low", "high", "both"], default="both")
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args()

    levels = {"low": synth.LOW_NOISE, "high": synth.HIGH_NOISE}
    picked = list(levels) if args.noise == "both" else [args.noise]
    results = {}
    for name in picked:
        r = run(levels[name], args.pigs, args.images, args.seed, args.split_seed)
        results[name] = r
        print(f"{name} noise: {r['n_train']} train / {r['n_test']} test, "
              f"{r['failed']} failed, extraction {r['extract_s']:.0f} s")
        for m in r["models"]:
            oob = f"  oob {m['oob']:.3f}" if m["oob"] is not None else ""
            print(f"  {m['kind']:<4} {100 * m['accuracy']:6.2f}%  errors {m['errors']:>3}"
                  f"  train {m['train_s']:.2f} s{oob}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
