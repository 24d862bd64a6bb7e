"""Command line interface.

Every subcommand prints a JSON report (sorted keys) on stdout and writes
artifacts to ``--out-dir``. Exit status: 0 success, 1 usage error, 2 data
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import gradcheck, io, metrics, synth
from .camera import rigid_flow, project_depth
from .errors import DataError
from .losses import LossWeights, NormalizationMode, RobustLossConfig
from .occlusion import occlusion_mask
from .pipeline import depth_pose_terms, flow_terms, loss_report
from .warp import bilinear_sample, warp_with_flow


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunConfig:
    weights: LossWeights = field(default_factory=LossWeights)
    robust: RobustLossConfig = field(default_factory=RobustLossConfig)
    norm: str = "max"
    iters: int = 1
    levels: int = 6
    seed: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def load_config(args) -> RunConfig:
    raw = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as f:
                raw = json.load(f)
        except OSError as e:
            raise DataError(f"{args.config}: {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise DataError(f"{args.config}: invalid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise DataError(f"{args.config}: expected a JSON object")
        known = {f.name for f in fields(RunConfig)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise DataError(f"{args.config}: unknown field(s) {unknown}")

    def sub(cls, key):
        vals = raw.get(key, {})
        try:
            return cls(**vals)
        except (TypeError, ValueError) as e:
            raise DataError(f"{args.config}: field '{key}': {e}") from e

    cfg = RunConfig(weights=sub(LossWeights, "weights"), robust=sub(RobustLossConfig, "robust"))
    for key in ("norm", "iters", "levels", "seed"):
        if key in raw:
            setattr(cfg, key, raw[key])
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, flag)
    try:
        cfg.norm = NormalizationMode(cfg.norm).value
    except ValueError as e:
        raise DataError(f"config field 'norm': {e}") from e
    for key in ("iters", "levels"):
        if not isinstance(getattr(cfg, key), int) or getattr(cfg, key) < 1:
            raise DataError(f"config field '{key}' must be a positive integer")
    return cfg


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _relative(files: dict) -> dict:
    """Artifact names relative to ``--out-dir`` so reports do not depend on it."""
    return {k: os.path.basename(v) for k, v in files.items()}


def _emit(report: dict) -> None:
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _write_masks(args, bundle, prefix: str = "") -> dict:
    names = {}
    for key in ("edge", "overlap", "blank", "combined"):
        path = _out(args, f"{prefix}{key}.pgm")
        io.write_mask_pgm(getattr(bundle, key), path)
        names[key] = path
    return names


# -- subcommands -------------------------------------------------------------

def cmd_synth(args) -> dict:
    cfg = load_config(args)
    scene, cam_t, cam_s = synth.suite_instance(cfg.seed, args.index)
    return _write_synth(args, scene, cam_t, cam_s)


def _write_synth(args, scene, cam_t, cam_s) -> dict:
    img_t, depth_t = synth.render(scene, cam_t)
    img_s, depth_s = synth.render(scene, cam_s)
    flow, flow_valid = synth.gt_flow(scene, cam_t, cam_s)
    occ = synth.gt_occlusion(scene, cam_t, cam_s)
    files = {
        "view_t": _out(args, "view_t.ppm"), "view_s": _out(args, "view_s.ppm"),
        "depth_t": _out(args, "depth_t.pfm"), "depth_s": _out(args, "depth_s.pfm"),
        "flow_gt": _out(args, "flow_gt.flo"), "flow_valid": _out(args, "flow_valid.pgm"),
        "occ_gt": _out(args, "occ_gt.pgm"), "camera": _out(args, "camera.json"),
    }
    io.write_image(img_t, files["view_t"])
    io.write_image(img_s, files["view_s"])
    io.write_pfm(depth_t, files["depth_t"])
    io.write_pfm(depth_s, files["depth_s"])
    io.write_flo(flow, files["flow_gt"])
    io.write_mask_pgm(flow_valid, files["flow_valid"])
    io.write_mask_pgm(occ, files["occ_gt"])
    io.write_camera_json(cam_t.K, synth.relative_pose(cam_t, cam_s), files["camera"])
    return {"files": _relative(files), "height": cam_t.height, "width": cam_t.width,
            "occluded_fraction": float(1.0 - occ.mean())}


def cmd_masks(args) -> dict:
    cfg = load_config(args)
    K, T = io.read_camera_json(args.camera)
    bundle = occlusion_mask(io.read_pfm(args.depth_t), io.read_pfm(args.depth_s), T, K, cfg.iters)
    files = _write_masks(args, bundle)
    return {"files": _relative(files), "iterations_used": bundle.iterations_used,
            "masked_fraction": {k: float(1.0 - getattr(bundle, k).mean())
                                for k in ("edge", "overlap", "blank", "combined")}}


def cmd_warp(args) -> dict:
    if not (args.flow or (args.depth_t and args.camera)):
        raise UsageError("warp: give either --flow or both --depth-t and --camera")
    x_s = io.read_image(args.image_s)
    if args.flow:
        warped, edge = warp_with_flow(x_s, io.read_flo(args.flow))
    else:
        K, T = io.read_camera_json(args.camera)
        warped, edge = bilinear_sample(x_s, project_depth(io.read_pfm(args.depth_t), T, K))
    files = {"warped": _out(args, "warped.ppm" if x_s.shape[2] == 3 else "warped.pgm"),
             "edge": _out(args, "edge.pgm")}
    io.write_image(warped, files["warped"])
    io.write_mask_pgm(edge, files["edge"])
    return {"files": _relative(files), "in_bounds_fraction": float(edge.mean())}


def _loss_run(x_t, x_s, depth_t, depth_s, T, K, flow, cfg: RunConfig):
    dp = depth_pose_terms(x_t, x_s, depth_t, depth_s, T, K, cfg.robust, cfg.weights, cfg.norm, cfg.iters)
    if flow is None:
        flow, _ = rigid_flow(depth_t, T, K)
    fl = flow_terms(x_t, x_s, flow, depth_t, T, K, dp.masks, cfg.robust, cfg.weights, cfg.levels)
    return dp, fl


def _write_loss_artifacts(args, x_t, dp, fl) -> dict:
    files = _write_masks(args, dp.masks)
    files["lm_dp"] = _out(args, "lm_dp.pgm")
    files["error_dp"] = _out(args, "error_dp.pfm")
    files["diff_dp"] = _out(args, "diff_dp.ppm" if x_t.shape[2] == 3 else "diff_dp.pgm")
    files["lm_flow"] = _out(args, "lm_flow.pgm")
    files["error_flow"] = _out(args, "error_flow.pfm")
    io.write_mask_pgm(dp.lm, files["lm_dp"])
    io.write_pfm(dp.error, files["error_dp"])
    io.write_image(np.abs(x_t - dp.x_hat) * dp.masks.edge[..., None], files["diff_dp"])
    io.write_mask_pgm(fl.levels[0].lm, files["lm_flow"])
    io.write_pfm(fl.levels[0].error, files["error_flow"])
    return files


def cmd_losses(args) -> dict:
    cfg = load_config(args)
    K, T = io.read_camera_json(args.camera)
    x_t, x_s = io.read_image(args.image_t), io.read_image(args.image_s)
    depth_t, depth_s = io.read_pfm(args.depth_t), io.read_pfm(args.depth_s)
    flow = io.read_flo(args.flow) if args.flow else None
    dp, fl = _loss_run(x_t, x_s, depth_t, depth_s, T, K, flow, cfg)
    report = {"config": cfg.as_dict(), "losses": loss_report(dp, fl, cfg.weights)}
    if args.out_dir:
        report["files"] = _relative(_write_loss_artifacts(args, x_t, dp, fl))
    return report


def cmd_gradcheck(args) -> dict:
    if args.size < 4 or args.trials < 1:
        raise UsageError("gradcheck: --size must be >= 4 and --trials >= 1")
    cfg = load_config(args)
    return gradcheck.run(args.size, args.trials, cfg.seed)


def cmd_eval_depth(args) -> dict:
    valid = io.read_mask_pgm(args.mask) if args.mask else None
    m = metrics.depth_metrics(io.read_pfm(args.pred), io.read_pfm(args.gt), valid, args.cap,
                              median_scale=not args.no_median_scale)
    return m.as_dict()


def cmd_eval_flow(args) -> dict:
    valid = io.read_mask_pgm(args.mask) if args.mask else None
    return metrics.flow_metrics(io.read_flo(args.pred), io.read_flo(args.gt), valid).as_dict()


def cmd_eval_pose(args) -> dict:
    pred, pred_conv = io.read_pose_text(args.pred)
    gt, gt_conv = io.read_pose_text(args.gt)
    return {"ate": metrics.ate(pred, gt, pred_conv, gt_conv), "poses": len(gt)}


def cmd_demo(args) -> dict:
    cfg = load_config(args)
    scene, cam_t, cam_s = synth.suite_instance(cfg.seed, 0)
    report = _write_synth(args, scene, cam_t, cam_s)
    x_t, depth_t = synth.render(scene, cam_t)
    x_s, depth_s = synth.render(scene, cam_s)
    T = synth.relative_pose(cam_t, cam_s)
    dp, fl = _loss_run(x_t, x_s, depth_t, depth_s, T, cam_t.K, None, cfg)
    report["files"].update(_relative(_write_loss_artifacts(args, x_t, dp, fl)))
    report["config"] = cfg.as_dict()
    report["losses"] = loss_report(dp, fl, cfg.weights)
    report["files"]["report"] = "report.json"
    with open(_out(args, "report.json"), "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    return report


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="occgeo", description="Occlusion-aware reconstruction geometry and losses.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_required=True, run_opts=False):
        sp.add_argument("--out-dir", required=out_required)
        sp.add_argument("--config", help="JSON run configuration; flags take precedence")
        sp.add_argument("--seed", type=int)
        if run_opts:
            sp.add_argument("--iters", type=int, help="mutual-projection rounds")
            sp.add_argument("--levels", type=int, help="flow pyramid levels")
            sp.add_argument("--norm", choices=[m.value for m in NormalizationMode])

    sp = sub.add_parser("synth", help="render a synthetic frame pair with ground truth")
    common(sp)
    sp.add_argument("--index", type=int, default=0, help="suite member to render")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("masks", help="edge/overlap/blank/combined occlusion masks")
    common(sp, run_opts=True)
    sp.add_argument("--depth-t", required=True)
    sp.add_argument("--depth-s", required=True)
    sp.add_argument("--camera", required=True)
    sp.set_defaults(func=cmd_masks)

    sp = sub.add_parser("warp", help="reconstruct frame t from frame s")
    common(sp)
    sp.add_argument("--image-s", required=True)
    sp.add_argument("--flow")
    sp.add_argument("--depth-t")
    sp.add_argument("--camera")
    sp.set_defaults(func=cmd_warp)

    sp = sub.add_parser("losses", help="evaluate every loss term")
    common(sp, out_required=False, run_opts=True)
    sp.add_argument("--image-t", required=True)
    sp.add_argument("--image-s", required=True)
    sp.add_argument("--depth-t", required=True)
    sp.add_argument("--depth-s", required=True)
    sp.add_argument("--camera", required=True)
    sp.add_argument("--flow", help="flow estimate (.flo); defaults to the rigid flow")
    sp.set_defaults(func=cmd_losses)

    sp = sub.add_parser("gradcheck", help="finite-difference check of analytic gradients")
    common(sp, out_required=False)
    sp.add_argument("--size", type=int, default=16)
    sp.add_argument("--trials", type=int, default=10)
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("eval-depth", help="depth error metrics")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--mask")
    sp.add_argument("--cap", type=float, default=80.0)
    sp.add_argument("--no-median-scale", action="store_true")
    sp.set_defaults(func=cmd_eval_depth)

    sp = sub.add_parser("eval-flow", help="flow EPE and F1")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--mask")
    sp.set_defaults(func=cmd_eval_flow)

    sp = sub.add_parser("eval-pose", help="absolute trajectory error")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.set_defaults(func=cmd_eval_pose)

    sp = sub.add_parser("demo", help="synthetic end-to-end run with all artifacts")
    common(sp, run_opts=True)
    sp.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        report = args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e.filename or ''}: {e.strerror}", file=sys.stderr)
        return 2
    _emit(report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
