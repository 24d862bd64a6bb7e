"""Photometric, smoothness and consistency losses.

Per-pixel penalties are returned as ``(H, W)`` error maps; scalar losses are
plain sums over pixels. Reductions use ``math.fsum`` so totals do not depend
on summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError
from .grids import as_flow, as_image, as_mask, check_same_hw


@dataclass(frozen=True)
class RobustLossConfig:
    lambda_rho: float = 0.15
    eps: float = 0.01
    c1: float = 0.01 ** 2
    c2: float = 0.03 ** 2
    ssim_window: int = 3

    def __post_init__(self):
        if not 0.0 <= self.lambda_rho <= 1.0:
            raise ValueError("lambda_rho must lie in [0, 1]")
        if not (self.eps > 0 and self.c1 > 0 and self.c2 > 0):
            raise ValueError("eps, c1 and c2 must be positive")
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise ValueError("ssim_window must be odd and >= 3")


@dataclass(frozen=True)
class LossWeights:
    w_recon_dp: float = 1.0
    w_smooth_dp: float = 0.2
    w_recon_f: float = 1.0
    w_consistency: float = 0.1
    w_smooth_f: float = 0.005

    def __post_init__(self):
        for name, v in vars(self).items():
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative")


class NormalizationMode(str, Enum):
    BASIC = "basic"
    MEAN = "mean"
    MAX = "max"


def total(a) -> float:
    return math.fsum(np.asarray(a, dtype=np.float64).ravel())


# -- per-pixel penalties -----------------------------------------------------

def _box_mean(a: np.ndarray, window: int) -> np.ndarray:
    r = window // 2
    padded = np.pad(a, ((r, r), (r, r)), mode="edge")
    return sliding_window_view(padded, (window, window)).mean(axis=(-2, -1))


def ssim_dissim_channels(x: np.ndarray, y: np.ndarray, cfg: RobustLossConfig) -> np.ndarray:
    """``1 - SSIM`` per pixel and channel for arbitrary real ``(H, W, C)`` arrays."""
    out = np.empty(x.shape)
    for c in range(x.shape[2]):
        a, b = x[:, :, c], y[:, :, c]
        mu_a = _box_mean(a, cfg.ssim_window)
        mu_b = _box_mean(b, cfg.ssim_window)
        var_a = _box_mean(a * a, cfg.ssim_window) - mu_a * mu_a
        var_b = _box_mean(b * b, cfg.ssim_window) - mu_b * mu_b
        cov = _box_mean(a * b, cfg.ssim_window) - mu_a * mu_b
        num = (2 * mu_a * mu_b + cfg.c1) * (2 * cov + cfg.c2)
        den = (mu_a * mu_a + mu_b * mu_b + cfg.c1) * (var_a + var_b + cfg.c2)
        out[:, :, c] = np.clip(1.0 - num / den, 0.0, 2.0)
    return out


def ssim_dissim(x, y, cfg: RobustLossConfig = RobustLossConfig()) -> np.ndarray:
    x, y = as_image(x, "x"), as_image(y, "y")
    if x.shape != y.shape:
        raise DataError(f"shape mismatch: {x.shape} vs {y.shape}")
    return ssim_dissim_channels(x, y, cfg).mean(axis=2)


def charbonnier(diff: np.ndarray, eps: float) -> np.ndarray:
    return np.sqrt(diff * diff + eps * eps)


def robust_penalty(x, y, cfg: RobustLossConfig = RobustLossConfig()) -> np.ndarray:
    """Charbonnier plus SSIM dissimilarity, both averaged over channels."""
    x, y = as_image(x, "x"), as_image(y, "y")
    if x.shape != y.shape:
        raise DataError(f"shape mismatch: {x.shape} vs {y.shape}")
    err = cfg.lambda_rho * charbonnier(x - y, cfg.eps).mean(axis=2)
    if cfg.lambda_rho < 1.0:
        err = err + (1.0 - cfg.lambda_rho) * ssim_dissim_channels(x, y, cfg).mean(axis=2)
    return err


def flow_penalty(a, b, cfg: RobustLossConfig = RobustLossConfig()) -> np.ndarray:
    """Robust penalty between two flow fields.

    The Charbonnier term works on pixel differences directly; the SSIM term
    uses both flows divided by the image diagonal so the stabilisers keep
    their meaning.
    """
    a, b = as_flow(a, "rigid"), as_flow(b, "flow")
    if a.shape != b.shape:
        raise DataError(f"shape mismatch: {a.shape} vs {b.shape}")
    err = cfg.lambda_rho * charbonnier(a - b, cfg.eps).mean(axis=2)
    if cfg.lambda_rho < 1.0:
        diag = math.hypot(a.shape[0], a.shape[1])
        err = err + (1.0 - cfg.lambda_rho) * ssim_dissim_channels(a / diag, b / diag, cfg).mean(axis=2)
    return err


# -- masks -------------------------------------------------------------------

def less_than_mean_mask(err, occ) -> np.ndarray:
    """1 where the error is strictly below ``sum(err * occ) / n_pixels``."""
    err = np.asarray(err, dtype=np.float64)
    occ = as_mask(occ, "occ")
    check_same_hw(err, occ, names=("err", "occ"))
    threshold = total(err * occ) / err.size
    return (err < threshold).astype(np.uint8)


# -- reconstruction losses ---------------------------------------------------

def recon_loss_basic(x_t, x_hat, cfg: RobustLossConfig = RobustLossConfig()) -> float:
    return total(robust_penalty(x_t, x_hat, cfg))


def _masked_recon(x_t, x_hat, occ, cfg) -> tuple[float, np.ndarray]:
    err = robust_penalty(x_t, x_hat, cfg)
    occ = as_mask(occ, "occ")
    check_same_hw(err, occ, names=("image", "occ"))
    lm = less_than_mean_mask(err, occ)
    return total(err * occ * lm), lm


def recon_loss_dp(x_t, x_hat, occ, cfg: RobustLossConfig = RobustLossConfig()) -> tuple[float, np.ndarray]:
    """Occlusion- and outlier-masked reconstruction loss for the depth-pose warp.

    Returns the loss and the less-than-mean mask it used.
    """
    return _masked_recon(x_t, x_hat, occ, cfg)


def recon_loss_flow(x_t, x_hat, occ, cfg: RobustLossConfig = RobustLossConfig()) -> tuple[float, np.ndarray]:
    """Same masking as :func:`recon_loss_dp`, applied to a flow-warped image."""
    return _masked_recon(x_t, x_hat, occ, cfg)


# -- smoothness --------------------------------------------------------------

def _edge_weights(guide: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = np.zeros(guide.shape[:2])
    gy = np.zeros(guide.shape[:2])
    gx[:, :-1] = np.abs(np.diff(guide, axis=1)).mean(axis=2)
    gy[:-1, :] = np.abs(np.diff(guide, axis=0)).mean(axis=2)
    return np.exp(-gx), np.exp(-gy)


def _weighted_grad_sq(q: np.ndarray, wx: np.ndarray, wy: np.ndarray) -> np.ndarray:
    dx = np.zeros(q.shape)
    dy = np.zeros(q.shape)
    dx[:, :-1] = np.diff(q, axis=1)
    dy[:-1, :] = np.diff(q, axis=0)
    return (dx * wx) ** 2 + (dy * wy) ** 2


def normalize_disparity(disparity, mode) -> np.ndarray:
    """The quantity the depth smoothness term differentiates.

    ``basic`` returns the disparity, ``mean`` divides it by its mean, ``max``
    returns ``max(disparity) / disparity`` (depth over minimum depth), which
    is at least 1 everywhere.
    """
    mode = NormalizationMode(mode)
    d = np.asarray(disparity, dtype=np.float64)
    if d.ndim != 2:
        raise DataError(f"disparity must be (H, W), got {d.shape}")
    if not np.all(np.isfinite(d)) or d.min() <= 0:
        raise DataError("disparity must be finite and strictly positive")
    if mode is NormalizationMode.BASIC:
        return d
    if mode is NormalizationMode.MEAN:
        return d / (total(d) / d.size)
    return d.max() / d


def smoothness_dp(disparity, guide, mode="max") -> float:
    guide = as_image(guide, "guide")
    q = normalize_disparity(disparity, mode)
    check_same_hw(q, guide, names=("disparity", "guide"))
    wx, wy = _edge_weights(guide)
    return total(_weighted_grad_sq(q, wx, wy))


def smoothness_flow(flow, guide) -> float:
    flow = as_flow(flow)
    guide = as_image(guide, "guide")
    check_same_hw(flow, guide, names=("flow", "guide"))
    wx, wy = _edge_weights(guide)
    return total(_weighted_grad_sq(flow[..., 0], wx, wy) + _weighted_grad_sq(flow[..., 1], wx, wy))


# -- consistency -------------------------------------------------------------

def consistency_weight(edge, blank, lm_f) -> np.ndarray:
    edge, blank, lm_f = as_mask(edge, "edge"), as_mask(blank, "blank"), as_mask(lm_f, "lm_f")
    check_same_hw(edge, blank, lm_f, names=("edge", "blank", "lm_f"))
    return (1 - edge * blank) * lm_f


def consistency_loss(rigid, flow, edge, blank, lm_f, cfg: RobustLossConfig = RobustLossConfig()) -> float:
    """Rigid-flow supervision restricted to edge- or blank-masked pixels."""
    err = flow_penalty(rigid, flow, cfg)
    w = consistency_weight(edge, blank, lm_f)
    check_same_hw(err, w, names=("flow", "masks"))
    return total(err * w)


# -- totals ------------------------------------------------------------------

def _as_sum(v) -> float:
    return math.fsum(v) if isinstance(v, (list, tuple)) else float(v)


def total_dp_loss(recon, smooth, weights: LossWeights = LossWeights()) -> float:
    """Weighted depth-pose loss; ``recon`` may list one term per adjacent frame."""
    return weights.w_recon_dp * _as_sum(recon) + weights.w_smooth_dp * _as_sum(smooth)


@dataclass(frozen=True)
class FlowScaleParts:
    recon: float
    consistency: float
    smooth: float


def scale_flow_loss(parts: FlowScaleParts, weights: LossWeights = LossWeights()) -> float:
    return (weights.w_recon_f * parts.recon + weights.w_consistency * parts.consistency
            + weights.w_smooth_f * parts.smooth)


def total_flow_loss(per_scale, weights: LossWeights = LossWeights()) -> float:
    """Unweighted sum over scales of the weighted per-scale flow losses."""
    return math.fsum(scale_flow_loss(p, weights) for p in per_scale)
