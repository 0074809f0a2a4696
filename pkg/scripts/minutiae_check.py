"""Detected bifurcation/endpoint counts against construction-time truth."""

import argparse

from earvein import pipeline, synth
from earvein.errors import PipelineError


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=50)
    ap.add_argument("--noise", choices=["low", "high"], default="low")
    ap.add_argument("--seed", type=int, default=77)
    args = ap.parse_args()

    cfg = synth.HIGH_NOISE if args.noise == "high" else synth.LOW_NOISE
    worst = 0
    for i in range(args.n):
        t = synth.make_template(synth.pig_seed(args.seed, i))
        img, _ = synth.render(t, cfg, i)
        try:
            m = pipeline.extract(img).minutiae
        except PipelineError as e:
            print(f"template {i}: {e}")
            continue
        db = len(m.bifurcations) - t.n_bifurcations
        de = len(m.endpoints) - t.n_endpoints
        worst = max(worst, abs(db), abs(de))
        print(f"template {i:>2}: bif {len(m.bifurcations)}/{t.n_bifurcations} ({db:+d})"
              f"  end {len(m.endpoints)}/{t.n_endpoints} ({de:+d})")
    print(f"worst deviation {worst}")


if __name__ == "__main__":
    main()
