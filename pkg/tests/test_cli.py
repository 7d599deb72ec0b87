import json

import numpy as np
import pytest

from asyaff.cli import SWEEP_HEADER, TRACE_HEADER, main
from asyaff.files import read_csv, read_pgm, write_pgm16


def test_gamma_scan_rows(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert main(["gamma-scan", "--gammas", "1.5,2.5,3.5", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header[0] == "gamma" and len(rows) == 3
    assert [r[-1] for r in rows] == ["0", "0", "1"]


def test_gradcheck_small_run_passes(capsys):
    assert main(["gradcheck", "--instances", "20"]) == 0
    assert capsys.readouterr().out.count("PASS") == 3


def test_landscape_outputs(tmp_path):
    assert main(["landscape", "--delta", "3", "--gamma", "1.5", "--resolution", "16", "--out-dir", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "surface.csv")
    assert header == ["x", "y", "loss"] and len(rows) == 256
    assert (tmp_path / "heatmap.png").exists()
    assert main(["landscape", "--resolution", "4", "--out-dir", str(tmp_path)]) == 1


def test_scene_and_maps(tmp_path):
    assert main(["gen-scenes", "--count", "2", "--seed", "3", "--out-dir", str(tmp_path)]) == 0
    scene_dir = tmp_path / "scene_0003"
    assert (scene_dir / "scene.json").exists() and (tmp_path / "scene_0004").exists()
    maps = tmp_path / "maps"
    assert main(["affinity-maps", "--scene", str(scene_dir), "--out-dir", str(maps)]) == 0
    assert len(list(maps.glob("depth_dir*.png"))) == 8


def test_optimize_preset_and_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"run": {"steps": 12, "record_every": 5}, "objective": {"depth": {"weight": 0.3}}}))
    out = tmp_path / "trace.csv"
    rc = main(["optimize", "--preset", "symmetric-depth-5x", "--config", str(cfg), "--seed", "1", "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert header == TRACE_HEADER
    assert [r[0] for r in rows] == ["0", "5", "10", "12"]


def test_sweep_header(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--deltas", "0,3.5", "--gammas", "0", "--scenes", "1", "--steps", "5", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == SWEEP_HEADER and len(rows) == 2


def test_convert_depth(tmp_path):
    write_pgm16(tmp_path / "disp.pgm", np.array([[0, 257], [513, 1025]], dtype=np.uint16))
    out = tmp_path / "depth.pgm"
    assert main(["convert-depth", "--input", str(tmp_path / "disp.pgm"), "--output", str(out),
                 "--baseline", "0.05", "--focal", "100"]) == 0
    # B*f = 5 m px; disparities 1, 2 and 4 px
    assert read_pgm(out).tolist() == [[0, 5000], [2500, 1250]]
    # the default camera puts 1-4 px disparities beyond the 16-bit range
    far = tmp_path / "far.pgm"
    assert main(["convert-depth", "--input", str(tmp_path / "disp.pgm"), "--output", str(far)]) == 0
    assert not read_pgm(far).any()
    assert main(["convert-depth", "--input", str(tmp_path / "disp.pgm"), "--output", str(far), "--max-depth", "99"]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["optimize", "--bogus"],
        ["nosuchcommand"],
        ["gamma-scan", "--gammas", "a,b"],
        ["optimize", "--preset", "unknown", "--out", "x.csv"],
        ["sweep", "--gammas", "3.0", "--out", "x.csv"],
        ["gen-scenes", "--out-dir", "x", "--config", "/nonexistent.json"],
    ],
)
def test_bad_input_exits_one(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_missing_scene_dir_exits_one(tmp_path):
    assert main(["optimize", "--scene", str(tmp_path / "none"), "--out", str(tmp_path / "t.csv")]) == 1
