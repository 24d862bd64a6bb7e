import json
import subprocess
import sys

import numpy as np
import pytest

from occgeo import io
from occgeo.camera import Pose, translation
from occgeo.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 else None), err


@pytest.fixture(scope="module")
def pair(tmp_path_factory):
    out = tmp_path_factory.mktemp("pair")
    assert main(["synth", "--out-dir", str(out), "--seed", "3", "--index", "1"]) == 0
    return out


def test_synth_writes_readable_files(pair):
    assert io.read_image(pair / "view_t.ppm").shape == (128, 416, 3)
    assert io.read_pfm(pair / "depth_s.pfm").shape == (128, 416)
    assert io.read_flo(pair / "flow_gt.flo").shape == (128, 416, 2)
    occ = io.read_mask_pgm(pair / "occ_gt.pgm")
    assert 0.01 <= 1 - occ.mean() < 0.5
    io.read_camera_json(pair / "camera.json")


def test_masks_and_warp(pair, tmp_path, capsys):
    code, rep, _ = run(capsys, "masks", "--out-dir", tmp_path, "--depth-t", pair / "depth_t.pfm",
                       "--depth-s", pair / "depth_s.pfm", "--camera", pair / "camera.json", "--iters", 2)
    assert code == 0 and rep["iterations_used"] <= 2
    assert set(rep["files"]) == {"edge", "overlap", "blank", "combined"}
    combined = io.read_mask_pgm(tmp_path / "combined.pgm")
    gt = io.read_mask_pgm(pair / "occ_gt.pgm")
    assert np.mean(combined == gt) > 0.95

    code, rep, _ = run(capsys, "warp", "--out-dir", tmp_path, "--image-s", pair / "view_s.ppm",
                       "--flow", pair / "flow_gt.flo")
    assert code == 0 and 0.5 < rep["in_bounds_fraction"] <= 1.0
    code, rep2, _ = run(capsys, "warp", "--out-dir", tmp_path, "--image-s", pair / "view_s.ppm",
                        "--depth-t", pair / "depth_t.pfm", "--camera", pair / "camera.json")
    assert code == 0 and rep2["in_bounds_fraction"] == pytest.approx(rep["in_bounds_fraction"], abs=1e-3)


def test_losses_report(pair, tmp_path, capsys):
    args = ["losses", "--image-t", pair / "view_t.ppm", "--image-s", pair / "view_s.ppm",
            "--depth-t", pair / "depth_t.pfm", "--depth-s", pair / "depth_s.pfm", "--camera", pair / "camera.json"]
    code, rep, _ = run(capsys, *args, "--levels", 3, "--norm", "basic")
    assert code == 0
    assert rep["config"]["levels"] == 3 and rep["config"]["norm"] == "basic"
    assert len(rep["losses"]["flow"]["levels"]) == 3
    assert rep["losses"]["depth_pose"]["recon"] > 0

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"levels": 2, "norm": "mean", "weights": {"w_smooth_dp": 0.0}}))
    code, rep, _ = run(capsys, *args, "--config", cfg, "--levels", 4, "--out-dir", tmp_path / "o")
    assert code == 0
    assert rep["config"]["levels"] == 4 and rep["config"]["norm"] == "mean"
    dp = rep["losses"]["depth_pose"]
    assert dp["total"] == dp["recon"]
    assert (tmp_path / "o" / "lm_dp.pgm").exists() and (tmp_path / "o" / "error_flow.pfm").exists()

    cfg.write_text(json.dumps({"colour": 1}))
    code, _, err = run(capsys, *args, "--config", cfg)
    assert code == 2 and "colour" in err


def test_gradcheck(capsys):
    code, rep, _ = run(capsys, "gradcheck", "--size", 8, "--trials", 2)
    assert code == 0 and rep["max_rel_err"] < 1e-4
    assert run(capsys, "gradcheck", "--size", 2)[0] == 1


def test_eval_flow_identical(pair, capsys):
    code, rep, _ = run(capsys, "eval-flow", "--pred", pair / "flow_gt.flo", "--gt", pair / "flow_gt.flo")
    assert code == 0 and rep == {"epe": 0.0, "f1": 0.0}


def test_eval_depth(pair, tmp_path, capsys):
    depth = io.read_pfm(pair / "depth_t.pfm")
    io.write_pfm(depth * 3.0, tmp_path / "pred.pfm")
    code, rep, _ = run(capsys, "eval-depth", "--pred", tmp_path / "pred.pfm", "--gt", pair / "depth_t.pfm")
    assert code == 0 and rep["abs_rel"] < 1e-6 and rep["a1"] == 1.0
    code, rep, _ = run(capsys, "eval-depth", "--pred", tmp_path / "pred.pfm", "--gt", pair / "depth_t.pfm",
                       "--no-median-scale", "--cap", 1000, "--mask", pair / "occ_gt.pgm")
    assert code == 0 and rep["a3"] == 0.0


def test_eval_pose(tmp_path, capsys):
    gt = [Pose.identity(), translation(0, 0, 1), translation(0, 0, 2)]
    pred = [Pose.identity(), translation(0, 0, 1), translation(0, 0, 1)]
    io.write_pose_text(gt, tmp_path / "gt.txt")
    io.write_pose_text(pred, tmp_path / "pred.txt")
    code, rep, _ = run(capsys, "eval-pose", "--pred", tmp_path / "pred.txt", "--gt", tmp_path / "gt.txt")
    assert code == 0 and rep["ate"] == pytest.approx((1 / 6) ** 0.5, abs=1e-12) and rep["poses"] == 3


def test_exit_codes(tmp_path, capsys):
    assert run(capsys)[0] == 1
    assert run(capsys, "eval-flow", "--pred", "x.flo")[0] == 1
    assert run(capsys, "demo", "--out-dir", tmp_path, "--norm", "median")[0] == 1
    code, _, err = run(capsys, "eval-flow", "--pred", tmp_path / "missing.flo", "--gt", tmp_path / "missing.flo")
    assert code == 2 and "missing.flo" in err
    (tmp_path / "bad.flo").write_bytes(b"nope")
    code, _, err = run(capsys, "eval-flow", "--pred", tmp_path / "bad.flo", "--gt", tmp_path / "bad.flo")
    assert code == 2 and "bad.flo" in err
    assert run(capsys, "warp", "--out-dir", tmp_path, "--image-s", tmp_path / "x.ppm")[0] == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "occgeo", "eval-flow", "--pred", "a", "--gt", "b"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "occgeo", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 1
