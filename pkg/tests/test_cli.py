import json

import numpy as np
import pytest
from PIL import Image

from earvein import cli, synth


def run(*argv):
    try:
        return cli.main([str(a) for a in argv])
    except SystemExit as e:
        return e.code


@pytest.fixture(scope="module")
def herd(tmp_path_factory):
    d = tmp_path_factory.mktemp("herd")
    return synth.generate_herd(d, 3, 5, synth.LOW_NOISE, seed=3)


@pytest.fixture(scope="module")
def black(tmp_path_factory):
    d = tmp_path_factory.mktemp("black")
    p = d / "black.png"
    Image.fromarray(np.zeros((96, 128, 3), np.uint8)).save(p)
    rows = [{"pig_id": f"pig{i // 2}", "path": "black.png"} for i in range(4)]
    (d / "manifest.json").write_text(json.dumps({"images": rows}))
    return p


def test_segment_writes_mask_and_iou(herd, tmp_path, capsys):
    img = herd.parent / "pig00_000.png"
    assert run("segment", img, "--out-dir", tmp_path / "s", "--manifest", herd, "--json") == 0
    out = json.loads(capsys.readouterr().out)
    assert (tmp_path / "s" / "mask.pgm").is_file() and out["iou"] > 0.9


def test_veins_and_features(herd, tmp_path, capsys):
    img = herd.parent / "pig01_002.png"
    assert run("veins", img, "--out-dir", tmp_path / "v") == 0
    assert (tmp_path / "v" / "skeleton.pgm").is_file() and (tmp_path / "v" / "minutiae.png").is_file()
    capsys.readouterr()
    assert run("features", img, "--pig-id", "pig01") == 0
    first = json.loads(capsys.readouterr().out)
    assert len(first["features"]) == 68 and first["pig_id"] == "pig01"
    # a debug dump must not change the numbers
    assert run("features", img, "--pig-id", "pig01", "--debug-dir", tmp_path / "dbg") == 0
    assert json.loads(capsys.readouterr().out) == first
    assert (tmp_path / "dbg" / "skeleton.pgm").is_file()


def test_synth_count(tmp_path, capsys):
    assert run("synth", tmp_path / "h", "--pigs", 2, "--images", 3, "--json") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["images"] == 6 and len(json.loads((tmp_path / "h" / "manifest.json").read_text())["images"]) == 6


def test_train_all_and_evaluate(herd, tmp_path, capsys):
    assert run("train", herd, "--all", "--out", tmp_path / "m", "--rf-trees", 10, "--json") == 0
    out = json.loads(capsys.readouterr().out)
    assert [r["kind"] for r in out["reports"]] == ["svm", "rf", "knn", "lr"]
    assert (out["n_train"], out["n_test"]) == (12, 3)
    assert run("evaluate", tmp_path / "m" / "model_svm.json", herd, "--json") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep == {**rep, "n_test": 3} and sum(map(sum, rep["confusion"])) == 3
    assert rep["accuracy"] == out["reports"][0]["accuracy"]


def test_enroll_identify(herd, tmp_path, capsys):
    g = tmp_path / "g.jsonl"
    root = herd.parent
    for pig in range(3):
        imgs = [root / f"pig{pig:02d}_{k:03d}.png" for k in range(4)]
        assert run("enroll", g, f"pig{pig:02d}", *imgs) == 0
    assert len(g.read_text().splitlines()) == 12
    capsys.readouterr()
    assert run("identify", g, root / "pig02_004.png", "--json") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["best"] == "pig02" and len(out["ranked"]) == 3


def test_bench_json(capsys):
    assert run("bench", "--n-iter", 1, "--json") == 0
    out = json.loads(capsys.readouterr().out)
    st = out["stages"]
    assert {"extract_s", "classify_s", "total_s"} <= set(st)
    assert st["total_s"]["mean"] == pytest.approx(st["extract_s"]["mean"] + st["classify_s"]["mean"])


@pytest.mark.parametrize("argv", [
    ["segment", "{img}", "--out-dir", "{tmp}/s"],
    ["veins", "{img}", "--out-dir", "{tmp}/v"],
    ["features", "{img}"],
    ["enroll", "{tmp}/g.jsonl", "pig00", "{img}"],
    ["bench", "{img}", "--n-iter", "1"],
    ["train", "{manifest}", "--out", "{tmp}/m.json"],
])
def test_black_image_exit_2(argv, black, tmp_path):
    sub = {"img": black, "tmp": tmp_path, "manifest": black.parent / "manifest.json"}
    assert run(*[a.format(**sub) for a in argv]) == 2
    assert not (tmp_path / "g.jsonl").exists()


def test_failure_exit_codes(herd, tmp_path):
    assert run("identify", tmp_path / "missing.jsonl", herd.parent / "pig00_000.png") == 3
    assert run("features", tmp_path / "missing.png") == 3
    assert run("frobnicate") == 1
    assert run("features") == 1
    assert run("train", herd, "--train-frac", 2) == 1
    assert run("bench", "--config", tmp_path / "nope.toml") == 3
    bad = tmp_path / "g.jsonl"
    bad.write_text("{not json\n")
    assert run("identify", bad, herd.parent / "pig00_000.png") == 3
