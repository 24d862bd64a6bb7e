"""Depth, flow and trajectory evaluation metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .camera import Pose
from .errors import DataError
from .grids import as_mask, check_same_hw
from .io import CAMERA_FROM_WORLD, WORLD_FROM_CAMERA

MIN_DEPTH = 1e-3


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    a1: float
    a2: float
    a3: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FlowMetrics:
    epe: float
    f1: float

    def as_dict(self) -> dict:
        return asdict(self)


def _mean(a: np.ndarray) -> float:
    return math.fsum(a.ravel()) / a.size


def _valid_values(pred, gt, valid):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DataError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    if valid is None:
        sel = np.ones(gt.shape[:2], dtype=bool)
    else:
        valid = as_mask(valid, "valid") if np.ndim(valid) == 2 else np.asarray(valid, dtype=bool)
        check_same_hw(gt, valid, names=("gt", "valid"))
        sel = valid.astype(bool)
    if not np.any(sel):
        raise DataError("no valid pixels to evaluate")
    return pred[sel], gt[sel]


def depth_metrics(pred, gt, valid=None, cap: float = 80.0, median_scale: bool = True) -> DepthMetrics:
    """Standard monocular depth errors and threshold accuracies."""
    if not cap > 0:
        raise ValueError("cap must be positive")
    p, g = _valid_values(pred, gt, valid)
    if median_scale:
        p = p * (np.median(g) / np.median(p))
    p = np.clip(p, MIN_DEPTH, cap)
    g = np.clip(g, MIN_DEPTH, cap)
    ratio = np.maximum(p / g, g / p)
    diff = p - g
    return DepthMetrics(
        abs_rel=_mean(np.abs(diff) / g),
        sq_rel=_mean(diff ** 2 / g),
        rmse=math.sqrt(_mean(diff ** 2)),
        rmse_log=math.sqrt(_mean((np.log(p) - np.log(g)) ** 2)),
        a1=_mean((ratio < 1.25).astype(np.float64)),
        a2=_mean((ratio < 1.25 ** 2).astype(np.float64)),
        a3=_mean((ratio < 1.25 ** 3).astype(np.float64)),
    )


def flow_metrics(pred, gt, valid=None) -> FlowMetrics:
    """Mean endpoint error and the fraction of outliers (EPE > 3 px and > 5% of |gt|)."""
    p, g = _valid_values(pred, gt, valid)
    epe = np.sqrt(((p - g) ** 2).sum(axis=-1))
    mag = np.sqrt((g ** 2).sum(axis=-1))
    outlier = (epe > 3.0) & (epe > 0.05 * mag)
    return FlowMetrics(epe=_mean(epe), f1=_mean(outlier.astype(np.float64)))


def camera_centers(poses, convention: str = WORLD_FROM_CAMERA) -> np.ndarray:
    """Camera positions expressed in the frame of the first camera."""
    if convention == CAMERA_FROM_WORLD:
        rots = [p.R.T for p in poses]
        centers = [-p.R.T @ p.t for p in poses]
    elif convention == WORLD_FROM_CAMERA:
        rots = [p.R for p in poses]
        centers = [p.t for p in poses]
    else:
        raise ValueError(f"unknown pose convention {convention!r}")
    c = np.asarray(centers)
    return (c - c[0]) @ rots[0]


def ate(pred: list[Pose], gt: list[Pose], pred_convention: str = WORLD_FROM_CAMERA,
        gt_convention: str = WORLD_FROM_CAMERA) -> float:
    """RMS translational error after re-basing and least-squares scale alignment."""
    if len(pred) != len(gt):
        raise DataError(f"snippet lengths differ: {len(pred)} vs {len(gt)}")
    if len(gt) < 2:
        raise DataError("snippets need at least two poses")
    tp = camera_centers(pred, pred_convention)
    tg = camera_centers(gt, gt_convention)
    pp = math.fsum((tp * tp).ravel())
    if pp == 0.0:
        if math.fsum((tg * tg).ravel()) == 0.0:
            return 0.0
        raise DataError("predicted translations are all zero but ground truth moves")
    scale = math.fsum((tg * tp).ravel()) / pp
    res = tg - scale * tp
    return math.sqrt(math.fsum((res * res).ravel()) / len(gt))
