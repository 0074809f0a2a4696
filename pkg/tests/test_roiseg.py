import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from earvein import imgcore, roiseg, synth
from earvein.errors import SegmentationEmpty
from oracles import two_pass_stats

CFG = roiseg.RoiConfig()


def _iou(a, b):
    return (a & b).sum() / (a | b).sum()


def test_channel_stats_simple():
    s = roiseg.channel_stats(np.full((4, 4), 40, np.uint8))
    assert (s.mean, s.stddev) == (40, 0)
    half = np.zeros((2, 4), np.uint8)
    half[:, 2:] = 100
    s = roiseg.channel_stats(half)
    assert (s.mean, s.stddev) == (50, 50)


def test_channel_stats_two_pass_oracle():
    r = np.random.default_rng(2).integers(0, 256, (37, 23)).astype(np.uint8)
    s = roiseg.channel_stats(r)
    m, sd = two_pass_stats(r.ravel())
    assert abs(s.mean - m) < 1e-9 and abs(s.stddev - sd) < 1e-9


def test_ratio_maps_pixel_and_guard():
    one = lambda v: np.array([[v]], np.uint8)
    m = roiseg.ratio_maps(one(100), one(50), one(25))
    assert m.rg[0, 0] == pytest.approx(2.0) and m.rb[0, 0] == pytest.approx(4.0)
    z = roiseg.ratio_maps(one(10), one(0), one(0))
    assert np.isfinite(z.rg).all() and z.rg[0, 0] == pytest.approx(1e7)


def test_ratio_maps_scalar_oracle():
    rng = np.random.default_rng(3)
    r, g, b = (rng.integers(0, 256, (9, 7)).astype(np.uint8) for _ in range(3))
    m = roiseg.ratio_maps(r, g, b)
    for y in range(9):
        for x in range(7):
            assert m.rg[y, x] == float(r[y, x]) / (float(g[y, x]) + 1e-6)
            assert m.rb[y, x] == float(r[y, x]) / (float(b[y, x]) + 1e-6)


def test_ratio_maps_mismatch():
    with pytest.raises(ValueError):
        roiseg.ratio_maps(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))


def test_red_threshold_tiers():
    r = np.full((10, 10), 28, np.uint8)
    assert roiseg.red_threshold(roiseg.ChannelStats(28, 5), r) == 28
    assert roiseg.red_threshold(roiseg.ChannelStats(100, 45), r) == 35
    assert roiseg.red_threshold(roiseg.ChannelStats(10, 70), r) == 35
    assert roiseg.red_threshold(roiseg.ChannelStats(2, 0), np.zeros((3, 3), np.uint8)) == 20


@settings(max_examples=60, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 30), st.integers(1, 30))),
       st.floats(0, 100))
def test_red_threshold_always_clamped(r, q):
    cfg = roiseg.RoiConfig(percentile=q)
    t = roiseg.red_threshold(roiseg.channel_stats(r), r, cfg)
    assert 20 <= t <= 35
    if roiseg.channel_stats(r).stddev < 30:
        assert t == np.clip(np.percentile(r, q), 20, 35)


def test_ratio_thresholds_branches():
    maps = roiseg.RatioMaps(np.full((5, 5), 2.0), np.full((5, 5), 2.0), 1e-6)
    assert roiseg.ratio_thresholds(maps, 30) == pytest.approx((2.0, 2.0))
    assert roiseg.ratio_thresholds(maps, 100) == pytest.approx((1.8, 1.8))
    assert roiseg.ratio_thresholds(maps, 5) == pytest.approx((2.2, 2.2))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 400), st.floats(0, 100), st.integers(0, 2 ** 32 - 1))
def test_ratio_threshold_histogram_shortcut_is_exact(n, q, seed):
    rng = np.random.default_rng(seed)
    r, g, b = (rng.integers(0, 256, n).astype(np.uint8) for _ in range(3))
    maps = roiseg.ratio_maps(r, g, b)
    cfg = roiseg.RoiConfig(ratio_percentile=q)
    fast = roiseg.ratio_thresholds(maps, 30, cfg, (r, g, b))
    slow = roiseg.ratio_thresholds(maps, 30, cfg)
    assert fast == pytest.approx(slow, rel=1e-12, abs=0)


def test_raw_mask_conjunction():
    r = np.array([[100, 100]], np.uint8)
    g = np.array([[20, 20]], np.uint8)
    b = np.array([[20, 90]], np.uint8)
    maps = roiseg.ratio_maps(r, g, b)
    th = roiseg.RoiThresholds(30, 3.0, 3.0)
    assert roiseg.raw_mask(r, maps, th).tolist() == [[True, False]]


def test_raw_mask_oracle():
    rng = np.random.default_rng(4)
    r, g, b = (rng.integers(0, 256, (12, 12)).astype(np.uint8) for _ in range(3))
    maps = roiseg.ratio_maps(r, g, b)
    th = roiseg.RoiThresholds(80, 1.2, 1.1)
    m1 = roiseg.raw_mask(r, maps, th)
    for y in range(12):
        for x in range(12):
            ok = (r[y, x] >= 80 and r[y, x] / (g[y, x] + 1e-6) >= 1.2
                  and r[y, x] / (b[y, x] + 1e-6) >= 1.1)
            assert m1[y, x] == ok


def test_refine_mask_closes_and_cleans():
    m = np.zeros((30, 30), bool)
    m[5:20, 5:20] = True
    m[10, 10:12] = False
    m[26, 26] = True
    out = roiseg.refine_mask(m)
    assert out[10, 10:12].all() and not out[26, 26]


def test_refine_mask_is_composition():
    m = np.random.default_rng(5).random((40, 40)) < 0.6
    assert np.array_equal(roiseg.refine_mask(m), imgcore.morph_open(imgcore.morph_close(m, 5), 5))


def test_largest_component():
    m = np.zeros((20, 20), bool)
    m[0:2, 0:5] = True
    m[10:15, 10:20] = True
    out = roiseg.largest_component(m)
    assert out.sum() == 50 and not out[0].any()
    single = np.zeros((5, 5), bool)
    single[1:3, 1:3] = True
    assert np.array_equal(roiseg.largest_component(single), single)


def test_largest_component_tie_lowest_label():
    m = np.zeros((6, 6), bool)
    m[0, 0:2] = True
    m[5, 4:6] = True
    out = roiseg.largest_component(m)
    assert out[0, 0:2].all() and not out[5].any()


def test_largest_component_empty_raises():
    with pytest.raises(SegmentationEmpty):
        roiseg.largest_component(np.zeros((4, 4), bool))


def test_contrast_tier_and_branch():
    assert [roiseg.contrast_tier(roiseg.ChannelStats(0, s)) for s in (5, 10, 45, 70)] == [0, 1, 2, 3]
    assert [roiseg.brightness_branch(roiseg.ChannelStats(m, 0)) for m in (5, 30, 61)] == \
        ["dark", "medium", "bright"]


def test_extract_roi_black_raises():
    with pytest.raises(SegmentationEmpty):
        roiseg.extract_roi(np.zeros((60, 80, 3), np.uint8))


@pytest.mark.parametrize("preset", ["default", "bright", "dark"])
def test_extract_roi_on_synth(preset):
    img, gt = synth.render(synth.make_template(11), synth.lighting(preset), 0)
    res = roiseg.extract_roi(img, keep_stages=True)
    assert _iou(res.mask, gt.ear_mask) >= 0.9
    assert not res.roi_image[~res.mask].any()
    assert np.array_equal(res.roi_image[res.mask], img[res.mask])
    # stage relations
    st = res.stages
    assert not (st["m4"] & ~st["m3"]).any() and not (st["m4"] & ~res.mask).any()
    assert imgcore.connected_components(res.mask).count == 1
    assert np.array_equal(imgcore.fill_holes(res.mask), res.mask)
    # every M1 pixel satisfies the three tests exactly
    r, g, b = imgcore.split_channels(img)
    maps = roiseg.ratio_maps(r, g, b)
    th = res.thresholds
    m1 = st["m1"]
    assert (r[m1] >= th.t_red).all() and (maps.rg[m1] >= th.t_rg).all() and (maps.rb[m1] >= th.t_rb).all()
    assert 20 <= th.t_red <= 35


def test_extract_roi_deterministic():
    img, _ = synth.render(synth.make_template(12))
    a, b = roiseg.extract_roi(img), roiseg.extract_roi(img)
    assert np.array_equal(a.mask, b.mask) and a.thresholds == b.thresholds


def test_extract_roi_too_small_flag():
    img = np.zeros((200, 200, 3), np.uint8)
    img[100:112, 100:112] = (200, 20, 20)   # 0.36% of the frame
    res = roiseg.extract_roi(img)
    assert res.status == "too_small"
