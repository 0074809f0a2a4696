"""ROI segmentation against the synthetic ear masks, per lighting preset."""

import argparse
from collections import defaultdict

import numpy as np

from earvein import roiseg, synth


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=50, help="images, cycling through the presets")
    ap.add_argument("--seed", type=int, default=1000)
    args = ap.parse_args()

    names = list(synth.LIGHTING)
    by_preset = defaultdict(list)
    tiers, branches = set(), set()
    for i in range(args.n):
        name = names[i % len(names)]
        img, gt = synth.render(synth.make_template(args.seed + i), synth.lighting(name), i)
        r = roiseg.extract_roi(img)
        union = np.count_nonzero(r.mask | gt.ear_mask)
        by_preset[name].append(np.count_nonzero(r.mask & gt.ear_mask) / union)
        tiers.add(roiseg.contrast_tier(r.stats))
        branches.add(roiseg.brightness_branch(r.stats))
    for name, v in by_preset.items():
        print(f"{name:<14} n={len(v):>2}  mean IoU {np.mean(v):.4f}  min {np.min(v):.4f}")
    allv = [x for v in by_preset.values() for x in v]
    print(f"overall mean IoU {np.mean(allv):.4f}")
    print("contrast tiers:", sorted(tiers))
    print("brightness branches:", sorted(branches))


if __name__ == "__main__":
    main()
