import json

import numpy as np
import pytest

from panolayout import cli, io
from panolayout.evaluation import layout_rmse


@pytest.fixture
def room_dir(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[synth]\nwidth = 128\nheight = 64\nhole_fraction = 0.05\n")
    out = tmp_path / "room"
    assert cli.main(["synth-room", "--config", str(cfg), "--out", str(out), "--seed", "2"]) == 0
    return out


def test_synth_room_outputs(room_dir):
    names = sorted(p.name for p in room_dir.iterdir())
    assert names == ["bottom.json", "depth.pfm", "labels.json", "labels.png", "normals.pfm", "top.json"]
    assert io.read_grid(room_dir / "depth.pfm").shape == (64, 128)
    assert io.read_grid(room_dir / "normals.pfm").shape == (64, 128, 3)
    assert (io.read_labels(room_dir / "labels.png") == 3).mean() >= 0.05


def test_extract_cues_recovers_boundaries(room_dir, tmp_path):
    out = tmp_path / "cues"
    rc = cli.main(["extract-cues", "--labels", str(room_dir / "labels.png"), "--normals",
                   str(room_dir / "normals.pfm"), "--depth", str(room_dir / "depth.pfm"), "--out", str(out)])
    assert rc == 0
    top = io.read_boundary(out / "top.json")
    assert layout_rmse(top, io.read_boundary(room_dir / "top.json")) < 2 * np.pi / 64
    validity = json.loads((out / "validity.json").read_text())
    assert validity["scene_valid"] is True
    assert not (out / "layout.png").exists()


def test_extract_cues_debug_and_derived_normals(room_dir, tmp_path):
    out = tmp_path / "dbg"
    rc = cli.main(["extract-cues", "--labels", str(room_dir / "labels.png"), "--depth",
                   str(room_dir / "depth.pfm"), "--out", str(out), "--debug"])
    assert rc == 0
    for name in ("layout.png", "refined.png", "top_raw.json", "bottom_raw.json", "top_median.json"):
        assert (out / name).exists()


def test_recon_bottom_stdout_and_file(room_dir, tmp_path, capsys):
    args = ["recon-bottom", "--top", str(room_dir / "top.json"), "--depth", str(room_dir / "depth.pfm")]
    assert cli.main(args + ["--exact"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "bottom" and doc["width"] == 128
    assert cli.main(args + ["--out", str(tmp_path / "b.json")]) == 0
    est = io.read_boundary(tmp_path / "b.json")
    assert layout_rmse(est, io.read_boundary(room_dir / "bottom.json")) < 0.02


def test_recon_bottom_rejects_bottom_kind(room_dir, capsys):
    rc = cli.main(["recon-bottom", "--top", str(room_dir / "bottom.json"), "--depth", str(room_dir / "depth.pfm")])
    assert rc == 1
    assert "--top" in capsys.readouterr().err


def test_attention_map(room_dir, tmp_path):
    assert cli.main(["attention", "--top", str(room_dir / "top.json"), "--out", str(tmp_path / "a.pfm")]) == 0
    a = io.read_pfm(tmp_path / "a.pfm")
    assert a.shape == (64, 128) and np.all(a > 0)


def test_eval_depth_reports(room_dir, tmp_path, capsys):
    depth = io.read_grid(room_dir / "depth.pfm")
    io.write_pfm(tmp_path / "pred.pfm", depth * 1.1)
    assert cli.main(["eval-depth", "--pred", str(tmp_path / "pred.pfm"), "--gt", str(room_dir / "depth.pfm")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["abs_rel"] == pytest.approx(0.1, rel=1e-5)
    assert rep["delta1"] == 100.0 and rep["i_d"] == 0.0
    assert cli.main(["eval-depth", "--pred", str(tmp_path / "pred.pfm"), "--gt", str(room_dir / "depth.pfm"),
                     "--report", str(tmp_path / "r.txt")]) == 0
    assert "abs_rel = " in (tmp_path / "r.txt").read_text()


def test_eval_layout_and_bias_pcc(room_dir, tmp_path, capsys):
    rc = cli.main(["eval-layout", "--pred-top", str(room_dir / "top.json"), "--gt-top", str(room_dir / "top.json"),
                   "--pred-bottom", str(room_dir / "bottom.json"), "--gt-bottom", str(room_dir / "bottom.json")])
    assert rc == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["rmse_top"] == 0.0 and rep["i_l"] == 0.0
    depth = io.read_grid(room_dir / "depth.pfm")
    io.write_color(tmp_path / "c.png", np.repeat((400.0 / depth)[..., None], 3, axis=-1))
    assert cli.main(["bias-pcc", "--color", str(tmp_path / "c.png"), "--depth", str(room_dir / "depth.pfm")]) == 0
    assert float(capsys.readouterr().out.split("=")[1]) > 0.95


def test_augment_directory(room_dir, tmp_path):
    out = tmp_path / "aug"
    assert cli.main(["augment", "--sample", str(room_dir), "--seed", "4", "--out", str(out)]) == 0
    applied = json.loads((out / "augment.json").read_text())
    assert applied["seed"] == 4
    depth = io.read_grid(out / "depth.pfm")
    src = io.read_grid(room_dir / "depth.pfm")
    if "shift" in applied["applied"]:
        src = np.roll(src, applied["applied"]["shift"], axis=1)
    if applied["applied"].get("flip"):
        src = src[:, ::-1]
    np.testing.assert_allclose(depth, src, rtol=1e-6)


def test_default_config_prints_toml(capsys):
    assert cli.main(["default-config"]) == 0
    assert "[crf]" in capsys.readouterr().out


def test_io_errors_exit_2(tmp_path, capsys):
    rc = cli.main(["eval-depth", "--pred", str(tmp_path / "missing.pfm"), "--gt", str(tmp_path / "x.pfm")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "--pred" in err and "missing.pfm" in err
    (tmp_path / "bad.pfm").write_bytes(b"Pf\n4 4\n-1.0\n" + bytes(8))
    rc = cli.main(["attention", "--top", str(tmp_path / "bad.pfm"), "--out", str(tmp_path / "a.pfm")])
    assert rc == 2
    assert cli.main(["augment", "--sample", str(tmp_path / "nowhere"), "--seed", "1", "--out", str(tmp_path)]) == 2


def test_validation_errors_exit_1(room_dir, tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[crf]\nsigma = 2\n")
    rc = cli.main(["recon-bottom", "--top", str(room_dir / "top.json"), "--depth", str(room_dir / "depth.pfm"),
                   "--config", str(bad)])
    assert rc == 1
    assert "bad.toml" in capsys.readouterr().err
    small = tmp_path / "small.pfm"
    io.write_pfm(small, np.ones((4, 8)))
    rc = cli.main(["eval-depth", "--pred", str(small), "--gt", str(room_dir / "depth.pfm")])
    assert rc == 1
    assert "--pred" in capsys.readouterr().err


def test_usage_error_is_argparse_exit():
    with pytest.raises(SystemExit) as exc:
        cli.main(["recon-bottom"])
    assert exc.value.code == 2
