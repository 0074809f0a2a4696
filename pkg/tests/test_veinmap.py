import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image, ImageDraw

from earvein import imgcore, roiseg, synth, veinmap
from earvein.errors import VeinsNotFound
from oracles import flood_components, neighbour_counts

CFG = veinmap.VeinConfig()


def _roi(red: np.ndarray, mask: np.ndarray | None = None) -> roiseg.RoiResult:
    mask = np.ones(red.shape, bool) if mask is None else mask
    img = np.zeros(red.shape + (3,), np.uint8)
    img[..., 0] = red
    img[..., 1] = img[..., 2] = red // 4
    img[~mask] = 0
    return roiseg.RoiResult(mask=mask, roi_image=img, thresholds=roiseg.RoiThresholds(20, 1, 1),
                            stats=roiseg.ChannelStats(float(red.mean()), float(red.std())))


def _curve_image(width=2, size=160, dark=70, bright=160):
    im = Image.new("L", (size, size), bright)
    pts = [(20 + t, 80 + 40 * np.sin(t / 25.0)) for t in range(0, 121, 4)]
    ImageDraw.Draw(im).line(pts, fill=dark, width=width)
    truth = Image.new("L", (size, size), 0)
    ImageDraw.Draw(truth).line(pts, fill=255, width=width)
    return np.asarray(im), np.asarray(truth) > 0


# --- enhancement and binarization ---------------------------------------------

def test_enhance_constant_roi_constant_output():
    out = veinmap.enhance(_roi(np.full((40, 40), 120, np.uint8)))
    assert np.unique(out).size == 1


def test_enhance_zero_red_inverts_to_white():
    # all in-mask red is 0, so the inverted plane is uniformly 255
    out = veinmap.enhance(_roi(np.zeros((30, 30), np.uint8)), tiles=1, clip=np.inf)
    assert (out == 255).all()


def test_enhance_reverses_order():
    red, truth = _curve_image()
    out = veinmap.enhance(_roi(red))
    assert out[truth].mean() > out[~truth].mean()


def test_binarize_constant_empty():
    assert not veinmap.binarize_veins(np.full((50, 50), 140, np.uint8)).any()


def test_binarize_thin_curve_coverage():
    red, truth = _curve_image(width=2)
    binary = veinmap.binarize_veins(veinmap.enhance(_roi(red)))
    assert binary[truth].mean() >= 0.9


# --- cleanup ------------------------------------------------------------------

def test_clean_removes_speckle_and_bridges_gap():
    m = np.zeros((80, 260), bool)
    m[10:20, 10:20] = True            # 100 px speckle
    m[50:56, 10:120] = True           # two long bars, 2 px apart
    m[50:56, 122:240] = True
    out = veinmap.clean_veins(m, CFG)
    assert not out[10:20, 10:20].any()
    assert imgcore.connected_components(out).count == 1


def test_clean_empty():
    assert not veinmap.clean_veins(np.zeros((20, 20), bool)).any()


def test_keep_major_components():
    m = np.zeros((10, 80), bool)
    for i, w in enumerate([2, 3, 4, 5, 6, 7, 8]):
        m[1, i * 11:i * 11 + w] = True
    out = veinmap.keep_major_components(m, 5)
    assert imgcore.connected_components(out).count == 5
    assert not out[1, 0:2].any() and not out[1, 11:14].any()
    three = np.zeros((10, 10), bool)
    three[0, 0] = three[5, 5] = three[9, 9] = True
    assert np.array_equal(veinmap.keep_major_components(three, 5), three)


def test_keep_major_components_tie_at_cutoff():
    m = np.zeros((5, 20), bool)
    m[0, 0:5] = True
    m[2, 0:3] = True
    m[2, 10:13] = True
    out = veinmap.keep_major_components(m, 2)
    assert out[2, 0:3].all() and not out[2, 10:13].any()


def test_merge_edges_identity_and_masking():
    veins = np.zeros((30, 30), bool)
    veins[10, 2:28] = True
    flat = np.full((30, 30), 100, np.uint8)
    roi = np.ones((30, 30), bool)
    assert np.array_equal(veinmap.merge_edges(veins, flat, roi), veins)
    roi[:, 20:] = False
    assert not veinmap.merge_edges(veins, flat, roi)[:, 20:].any()


def test_merge_edges_bridges_gap():
    veins = np.zeros((40, 60), bool)
    veins[18:22, 2:25] = True
    veins[18:22, 35:58] = True
    enhanced = np.zeros((40, 60), np.uint8)
    enhanced[20:, :] = 255            # a horizontal edge running through the gap
    before = imgcore.connected_components(veins).count
    after = imgcore.connected_components(
        veinmap.merge_edges(veins, enhanced, np.ones_like(veins))).count
    assert before == 2 and after == 1


def test_merge_edges_dimension_mismatch():
    with pytest.raises(ValueError):
        veinmap.merge_edges(np.zeros((3, 3), bool), np.zeros((3, 4), np.uint8), np.zeros((3, 3), bool))


# --- skeleton and minutiae ----------------------------------------------------

def test_skeleton_rejects_blocks():
    with pytest.raises(ValueError):
        veinmap.Skeleton(np.ones((2, 2), bool))


def test_minutiae_line_and_cross():
    line = np.zeros((5, 5), bool)
    line[2, 1:4] = True
    assert veinmap.detect_minutiae(veinmap.Skeleton(line)) == ([], [(1, 2), (3, 2)])
    plus = np.zeros((7, 7), bool)
    plus[3, 1:6] = True
    plus[1:6, 3] = True
    bif, ends = veinmap.detect_minutiae(veinmap.Skeleton(plus))
    assert bif == [(3, 3)] and sorted(ends) == [(1, 3), (3, 1), (3, 5), (5, 3)]


def test_minutiae_five_pixel_plus_follows_neighbour_rule():
    # each arm pixel of the 5-pixel plus touches the centre and two other arms
    # diagonally, so the literal count rule makes all five candidates
    cross = np.zeros((5, 5), bool)
    cross[2, 1:4] = True
    cross[1:4, 2] = True
    assert (neighbour_counts(cross)[cross] == [3, 3, 4, 3, 3]).all()
    assert veinmap.detect_minutiae(veinmap.Skeleton(cross)) == ([(2, 2)], [])


def _random_skeleton(seed):
    m = np.random.default_rng(seed).random((40, 40)) < 0.45
    return imgcore.skeletonize(imgcore.morph_close(m, 3))


@pytest.mark.parametrize("seed", range(10))
def test_minutiae_match_neighbour_oracle(seed):
    sk = _random_skeleton(seed)
    bif, ends = veinmap.detect_minutiae(veinmap.Skeleton(sk))
    nb = neighbour_counts(sk)
    assert sorted(ends) == sorted((x, y) for y, x in zip(*np.nonzero(sk & (nb == 1))))
    cand = sk & (nb > 2)
    assert all(cand[y, x] for x, y in bif)
    # one bifurcation per 8-connected cluster of candidates
    assert len(bif) == len(flood_components(cand)[1])


def test_sample_skeleton_stride():
    sk = np.zeros((20, 20), bool)
    sk[5, :10] = True
    assert len(veinmap.sample_skeleton(veinmap.Skeleton(sk), 200)) == 10
    big = np.zeros((40, 40), bool)
    big[::4, :] = True              # 10 rows x 40 = 400 pixels
    pts = veinmap.sample_skeleton(veinmap.Skeleton(big), 200)
    ys, xs = np.nonzero(big)
    assert len(pts) == 200 and pts == [(int(x), int(y)) for y, x in zip(ys[::2], xs[::2])]
    assert veinmap.sample_skeleton(veinmap.Skeleton(np.zeros((4, 4), bool)), 200) == []


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 900), st.integers(1, 300))
def test_sample_skeleton_never_exceeds_count(p, count):
    sk = np.zeros((30, 60), bool)
    sk[::2].flat[:p] = True
    pts = veinmap.sample_skeleton(veinmap.Skeleton(sk), count)
    assert len(pts) <= count and len(pts) == (-(-p // -(-p // count)) if p else 0)


def test_prune_spurs_removes_short_branch():
    sk = np.zeros((30, 60), bool)
    sk[15, 5:55] = True
    sk[10:15, 30] = True              # 5 px spur
    pruned = veinmap.prune_spurs(sk, 10)
    bif, ends = veinmap.detect_minutiae(veinmap.Skeleton(pruned))
    assert bif == [] and len(ends) == 2
    kept = veinmap.prune_spurs(sk, 3)
    assert len(veinmap.detect_minutiae(veinmap.Skeleton(kept))[0]) == 1


def test_working_factor():
    assert veinmap.working_factor(1024, 1024) == 1
    assert veinmap.working_factor(4032, 1024) == 4
    assert veinmap.working_factor(4032, 0) == 1


# --- full chain ---------------------------------------------------------------

def test_extract_veins_black_raises():
    roi = _roi(np.zeros((60, 60), np.uint8))
    with pytest.raises(VeinsNotFound):
        veinmap.extract_veins(roi)
    empty = _roi(np.zeros((60, 60), np.uint8), np.zeros((60, 60), bool))
    with pytest.raises(VeinsNotFound):
        veinmap.extract_veins(empty)


@pytest.mark.parametrize("seed", [0, 5, 9])
def test_extract_veins_on_synth(seed):
    t = synth.make_template(seed)
    img, _ = synth.render(t)
    roi = roiseg.extract_roi(img)
    m = veinmap.extract_veins(roi, keep_stages=True)
    assert abs(len(m.bifurcations) - t.n_bifurcations) <= 2
    assert abs(len(m.endpoints) - t.n_endpoints) <= 2
    sk = m.stages["skeleton"]
    assert all(sk[y, x] for x, y in m.bifurcations + m.endpoints + m.samples)
    assert not (m.stages["merged"] & ~roi.mask).any()
    assert len(m.samples) <= CFG.sample_count
    again = veinmap.extract_veins(roi)
    assert (again.bifurcations, again.endpoints, again.samples) == \
        (m.bifurcations, m.endpoints, m.samples)


def test_extract_veins_full_resolution():
    t = synth.make_template(1)
    img, _ = synth.render(t, synth.full_res())
    m = veinmap.extract_veins(roiseg.extract_roi(img))
    assert (m.image_width, m.image_height) == (4032, 3024)
    assert abs(len(m.bifurcations) - t.n_bifurcations) <= 2
    assert abs(len(m.endpoints) - t.n_endpoints) <= 2


def test_config_validation():
    with pytest.raises(ValueError):
        veinmap.VeinConfig(adaptive_block=24)
    with pytest.raises(ValueError):
        veinmap.VeinConfig(major_components=0)
