"""Image to feature vector in one call, with per-stage wall-clock timings."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import featvec, roiseg, veinmap
from .errors import SegmentationEmpty


@dataclass
class Extraction:
    roi: roiseg.RoiResult
    minutiae: veinmap.MinutiaeSet
    features: featvec.FeatureVector
    timing: dict[str, float] = field(default_factory=dict)


def extract(img: np.ndarray, roi_cfg: roiseg.RoiConfig = roiseg.RoiConfig(),
            vein_cfg: veinmap.VeinConfig = veinmap.VeinConfig(), *, pig_id: str | None = None,
            source: str = "", keep_stages: bool = False) -> Extraction:
    """Run ROI segmentation, vein extraction and feature assembly.

    Raises SegmentationEmpty or VeinsNotFound; a ``too_small`` ROI is
    treated as a segmentation failure.
    """
    t0 = time.perf_counter()
    roi = roiseg.extract_roi(img, roi_cfg, keep_stages)
    if roi.status != "ok":
        raise SegmentationEmpty(f"ROI covers too little of the image ({roi.mask.mean():.4f})")
    t1 = time.perf_counter()
    m = veinmap.extract_veins(roi, vein_cfg, keep_stages)
    t2 = time.perf_counter()
    fv = featvec.assemble(m, pig_id, source)
    t3 = time.perf_counter()
    timing = {"roi_s": t1 - t0, "veins_s": t2 - t1, "features_s": t3 - t2, "extract_s": t3 - t0}
    return Extraction(roi, m, fv, timing)
