"""End-to-end loss evaluation for one target frame and one adjacent frame."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import Intrinsics, Pose, project_depth, rigid_flow
from .losses import (
    FlowScaleParts,
    LossWeights,
    RobustLossConfig,
    consistency_loss,
    recon_loss_dp,
    recon_loss_flow,
    robust_penalty,
    scale_flow_loss,
    smoothness_dp,
    smoothness_flow,
    total_dp_loss,
    total_flow_loss,
)
from .occlusion import MaskBundle, occlusion_mask
from .warp import bilinear_sample, flow_pyramid, mask_pyramid, pyramid, warp_with_flow


@dataclass
class DepthPoseResult:
    masks: MaskBundle
    x_hat: np.ndarray
    error: np.ndarray
    lm: np.ndarray
    recon: float
    smooth: float
    total: float


@dataclass
class FlowLevel:
    x_hat: np.ndarray
    error: np.ndarray
    occ: np.ndarray
    lm: np.ndarray
    parts: FlowScaleParts


@dataclass
class FlowResult:
    levels: list[FlowLevel] = field(default_factory=list)
    total: float = 0.0


def depth_pose_terms(x_t, x_s, depth_t, depth_s, T_t_to_s: Pose, K: Intrinsics,
                     cfg: RobustLossConfig = RobustLossConfig(), weights: LossWeights = LossWeights(),
                     mode: str = "max", iterations: int = 1) -> DepthPoseResult:
    masks = occlusion_mask(depth_t, depth_s, T_t_to_s, K, iterations)
    x_hat, _ = bilinear_sample(x_s, project_depth(depth_t, T_t_to_s, K))
    error = robust_penalty(x_t, x_hat, cfg)
    recon, lm = recon_loss_dp(x_t, x_hat, masks.combined, cfg)
    smooth = smoothness_dp(1.0 / np.asarray(depth_t, dtype=np.float64), x_t, mode)
    return DepthPoseResult(masks, x_hat, error, lm, recon, smooth, total_dp_loss(recon, smooth, weights))


def flow_level_parts(x_t, x_s, flow, rigid, occ, edge, blank,
                     cfg: RobustLossConfig = RobustLossConfig()) -> FlowLevel:
    """Loss terms at a single scale; ``occ``, ``edge`` and ``blank`` are held fixed."""
    x_hat, in_bounds = warp_with_flow(x_s, flow)
    occ_eff = occ * in_bounds
    error = robust_penalty(x_t, x_hat, cfg)
    recon, lm = recon_loss_flow(x_t, x_hat, occ_eff, cfg)
    cons = consistency_loss(rigid, flow, edge, blank, lm, cfg)
    smooth = smoothness_flow(flow, x_t)
    return FlowLevel(x_hat, error, occ_eff, lm, FlowScaleParts(recon, cons, smooth))


def flow_terms(x_t, x_s, flow, depth_t, T_t_to_s: Pose, K: Intrinsics, masks: MaskBundle,
               cfg: RobustLossConfig = RobustLossConfig(), weights: LossWeights = LossWeights(),
               levels: int = 6) -> FlowResult:
    """Multi-scale flow loss.

    Images are mean-pooled, flows mean-pooled and halved per level, occlusion
    masks min-pooled; the less-than-mean mask is recomputed at every level.
    """
    rigid, _ = rigid_flow(depth_t, T_t_to_s, K)
    xs_t, xs_s = pyramid(x_t, levels), pyramid(x_s, levels)
    flows, rigids = flow_pyramid(flow, levels), flow_pyramid(rigid, levels)
    occs = mask_pyramid(masks.combined, levels)
    edges, blanks = mask_pyramid(masks.edge, levels), mask_pyramid(masks.blank, levels)
    result = FlowResult()
    for k in range(levels):
        result.levels.append(flow_level_parts(xs_t[k], xs_s[k], flows[k], rigids[k],
                                              occs[k], edges[k], blanks[k], cfg))
    result.total = total_flow_loss([lv.parts for lv in result.levels], weights)
    return result


def loss_report(dp: DepthPoseResult, fl: FlowResult, weights: LossWeights) -> dict:
    return {
        "depth_pose": {
            "recon": dp.recon,
            "smooth": dp.smooth,
            "total": dp.total,
            "iterations_used": dp.masks.iterations_used,
            "masked_fraction": {
                "edge": float(1.0 - dp.masks.edge.mean()),
                "overlap": float(1.0 - dp.masks.overlap.mean()),
                "blank": float(1.0 - dp.masks.blank.mean()),
                "combined": float(1.0 - dp.masks.combined.mean()),
                "less_than_mean": float(1.0 - dp.lm.mean()),
            },
        },
        "flow": {
            "levels": [
                {"recon": lv.parts.recon, "consistency": lv.parts.consistency,
                 "smooth": lv.parts.smooth, "total": scale_flow_loss(lv.parts, weights)}
                for lv in fl.levels
            ],
            "total": fl.total,
        },
    }
