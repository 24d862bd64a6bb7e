"""Occlusion-aware view-synthesis geometry, masks, and unsupervised losses."""

from .camera import (
    Intrinsics,
    Pose,
    ProjectionMap,
    backproject,
    compose,
    invert,
    project,
    project_depth,
    rigid_flow,
    transform_points,
)
from .losses import LossWeights, NormalizationMode, RobustLossConfig
from .occlusion import MaskBundle, blank_mask, edge_mask, occlusion_mask, overlap_mask
from .warp import bilinear_sample, pyramid, warp_with_flow

__version__ = "0.1.0"

__all__ = [
    "Intrinsics", "Pose", "ProjectionMap", "backproject", "compose", "invert", "project",
    "project_depth", "rigid_flow", "transform_points",
    "LossWeights", "NormalizationMode", "RobustLossConfig",
    "MaskBundle", "blank_mask", "edge_mask", "occlusion_mask", "overlap_mask",
    "bilinear_sample", "pyramid", "warp_with_flow",
]
