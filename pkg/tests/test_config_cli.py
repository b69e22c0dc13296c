import csv
import json

import numpy as np
import pytest

from polhdr import io
from polhdr.cli import EXIT_CODES, main
from polhdr.config import ConfigError, PipelineConfig, provenance
from polhdr.core import LdrImage


def test_config_round_trip(tmp_path):
    cfg = PipelineConfig(phi_deg=12.5, seed=3, shot_noise=True, geometry="independent")
    path = tmp_path / "c.cfg"
    cfg.save(path)
    assert PipelineConfig.load(path) == cfg
    assert PipelineConfig.loads(cfg.dumps()).digest() == cfg.digest()


@pytest.mark.parametrize("text", [
    "nonsense = 1\n",
    "seed = 1\nseed = 2\n",
    "seed = 1.5\n",
    "seed\n",
    "geometry = \"sideways\"\n",
    "p_min = 300\n",
    "tonemap = 1\n",
    "bits = true\n",
    "rho = [1]\n",
])
def test_config_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        PipelineConfig.loads(text)


def test_config_comments_and_hash():
    cfg = PipelineConfig.loads("# comment\n\nseed = 4\n")
    assert cfg.seed == 4
    assert cfg.digest() != PipelineConfig().digest()
    assert PipelineConfig().digest() == PipelineConfig().digest()
    with pytest.raises(ConfigError):
        cfg.with_overrides(nope=1)


def test_provenance_hashes(tmp_path):
    f = tmp_path / "x.bin"
    f.write_bytes(b"data")
    a = provenance(PipelineConfig(), [f])
    b = provenance(PipelineConfig(), [f])
    assert a == b and a["config_sha256"] == PipelineConfig().digest()
    assert a["inputs"][str(f)] == io.file_sha256(f)


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def raw_frame(tmp_path):
    out = tmp_path / "raw.png"
    assert run("simulate", "--size", 48, "--decades", 3, "--phi-deg", 30, "--gain", 2000,
               "--out", out) == 0
    return out


def test_simulate_writes_frame_and_truth(raw_frame):
    img = io.read_ldr(raw_frame)
    assert img.shape == (192, 192) and img.bit_depth == 8
    truth = io.read_pfm(raw_frame.with_name("raw_truth.pfm"))
    assert truth.shape == (48, 48)


def test_simulate_from_scene_file(tmp_path):
    scene = tmp_path / "scene.pfm"
    io.write_pfm(scene, np.full((4, 4), 0.25))
    assert run("simulate", "--scene", scene, "--gain", 200, "--bits", 12, "--rho", 0.002,
               "--out", tmp_path / "r.pgm", "--truth", tmp_path / "t.pfm") == 0
    img = io.read_ldr(tmp_path / "r.pgm")
    assert img.shape == (16, 16) and img.bit_depth == 12


def test_demux_calibrate_fuse_eval(tmp_path, raw_frame):
    prefix = tmp_path / "stack_"
    assert run("demux", raw_frame, "--out-prefix", prefix) == 0
    stack = [tmp_path / f"stack_{a}.png" for a in ("000", "045", "090", "135")]
    assert all(p.exists() for p in stack)

    calib = tmp_path / "calib.json"
    fig = tmp_path / "hist.png"
    assert run("calibrate", *reversed(stack), "--pmin", 5, "--pmax", 250, "--report", calib,
               "--figure", fig) == 0
    report = json.loads(calib.read_text())
    assert report["provenance"]["config_sha256"] == PipelineConfig().digest()
    truth = [30, 15, 60, 75]  # sensor angles minus 30 degrees, folded into [0, 90]
    assert np.allclose(report["calibration"]["theta_hat_deg"], truth, atol=0.25)
    assert fig.stat().st_size > 0

    hdr = tmp_path / "hdr.pfm"
    assert run("fuse", *stack, "--calib", calib, "--out", hdr, "--tonemap", tmp_path / "tm.png") == 0
    assert (tmp_path / "hdr_coverage.pfm").exists() and (tmp_path / "tm.png").exists()

    ev = tmp_path / "eval.json"
    assert run("eval", "--ref", raw_frame.with_name("raw_truth.pfm"), "--test", hdr,
               "--coverage", tmp_path / "hdr_coverage.pfm", "--tonemap", "--report", ev,
               "--figure", tmp_path / "cmp.png") == 0
    out = json.loads(ev.read_text())
    for block in ("linear", "tonemapped"):
        assert {"psnr", "ssim", "ms_ssim", "q_score"} <= set(out[block])
    assert out["linear"]["psnr"] >= 40
    assert "config_sha256" in out["provenance"]


def test_pipeline_outputs_and_determinism(tmp_path, raw_frame):
    for name in ("a", "b"):
        assert run("pipeline", raw_frame, "--out-dir", tmp_path / name) == 0
    for f in ("hdr.pfm", "coverage.pfm", "preview.png", "calib.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    report = json.loads((tmp_path / "a" / "calib.json").read_text())
    assert report["provenance"]["config"]["phi_deg"] == 77.0
    assert 0 < report["coverage_fraction"] <= 1


def test_simulate_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--size", 8, "--shot-noise", "--read-noise", 1.5, "--seed", 11,
                   "--gain", 300, "--out", tmp_path / f"{name}.png") == 0
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_all_black_frame_fails_in_calibrate(tmp_path, capsys):
    raw = tmp_path / "black.png"
    io.write_ldr(raw, LdrImage(np.zeros((16, 16))))
    assert run("pipeline", raw, "--out-dir", tmp_path / "o") == EXIT_CODES["calibrate"]
    assert "[calibrate]" in capsys.readouterr().err


def test_error_exit_codes(tmp_path, capsys):
    bad = tmp_path / "odd.png"
    io.write_ldr(bad, LdrImage(np.zeros((6, 6))))
    assert run("pipeline", bad, "--out-dir", tmp_path / "o") == EXIT_CODES["input"]
    assert run("demux", tmp_path / "missing.png") == EXIT_CODES["input"]
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("unknown = 1\n")
    assert run("--config", cfg, "config") == EXIT_CODES["config"]
    assert run("sweep", "--rho-min", 0.5, "--rho-max", 0.1, "--out", tmp_path / "s.csv") == EXIT_CODES["sweep"]
    with pytest.raises(SystemExit) as exc:
        run("fuse")
    assert exc.value.code == 2
    capsys.readouterr()


def test_config_command(tmp_path, capsys):
    assert run("config") == 0
    assert PipelineConfig.loads(capsys.readouterr().out) == PipelineConfig()
    path = tmp_path / "c.cfg"
    assert run("config", "--write", path) == 0
    assert run("--config", path, "provenance", path) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["inputs"][str(path)] == io.file_sha256(path)


def test_fuse_bracket_command(tmp_path):
    radiance = np.linspace(1, 300, 64).reshape(8, 8)
    shots = []
    lines = ["file,time"]
    for k, t in enumerate((1.0, 4.0, 16.0)):
        p = tmp_path / f"shot{k}.png"
        io.write_ldr(p, LdrImage(np.clip(np.rint(radiance * t / 4), 0, 255)))
        shots.append(p)
        lines.append(f"{p.name},{t}")
    times = tmp_path / "t.csv"
    times.write_text("\n".join(lines) + "\n")
    out = tmp_path / "gt.pfm"
    assert run("fuse-bracket", "--times", times, *reversed(shots), "--out", out) == 0
    hdr = io.read_pfm(out)
    cov = io.read_pfm(tmp_path / "gt_coverage.pfm")
    good = cov > 0
    assert np.allclose(hdr[good], radiance[good] / 4, atol=0.5)
    plain = tmp_path / "plain.csv"
    plain.write_text("1\n4\n16\n")
    assert run("fuse-bracket", "--times", plain, *shots, "--out", tmp_path / "g2.pfm") == 0
    assert np.array_equal(io.read_pfm(tmp_path / "g2.pfm"), hdr)


def test_sweep_command(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert run("sweep", "--steps", 12, "--include-zero", "--out", out) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 13 and float(rows[0]["rho"]) == 0.0
    assert float(rows[0]["error_pct"]) < 1e-6
    assert out.with_suffix(".png").stat().st_size > 0
    assert "rho=1/500" in capsys.readouterr().out
