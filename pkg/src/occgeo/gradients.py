"""Analytic gradients of the Charbonnier reconstruction loss.

Only the ``lambda_rho == 1`` configuration is covered (no SSIM term). Masks
are treated as constants. Bilinear weights are piecewise linear in the
sampling coordinate; exactly on a grid line the derivative of the cell that
``floor`` selects is returned, so test points should sit away from integers.
"""

from __future__ import annotations

import numpy as np

from .camera import Intrinsics, Pose
from .grids import as_depth, as_flow, as_image, as_mask, check_same_hw, pixel_grid
from .losses import RobustLossConfig
from .warp import footprint, flow_projection, sample_footprint


def _require_charbonnier_only(cfg: RobustLossConfig) -> None:
    if cfg.lambda_rho != 1.0:
        raise ValueError("analytic gradients need lambda_rho == 1 (Charbonnier only)")


def _sampling_derivatives(x_t, x_s, i_hat, j_hat, in_front, mask, cfg):
    """Loss derivative with respect to the sampling coordinates ``(i_hat, j_hat)``."""
    h, w = x_s.shape[:2]
    fp = footprint(i_hat, j_hat, in_front, w, h)
    x_hat = sample_footprint(x_s, fp)
    r = x_hat - x_t
    weight = (mask * fp.in_bounds)[..., None]
    dl_dx = weight * cfg.lambda_rho * r / np.sqrt(r * r + cfg.eps ** 2) / x_s.shape[2]

    x0, y0 = fp.x0, fp.y0
    a = x_s[y0, x0]
    b = x_s[y0, x0 + 1]
    c = x_s[y0 + 1, x0]
    d = x_s[y0 + 1, x0 + 1]
    wx, wy = fp.wx[..., None], fp.wy[..., None]
    dx_di = (1.0 - wy) * (b - a) + wy * (d - c)
    dx_dj = (1.0 - wx) * (c - a) + wx * (d - b)
    return (dl_dx * dx_di).sum(axis=2), (dl_dx * dx_dj).sum(axis=2)


def grad_recon_wrt_flow(x_t, x_s, flow, mask, cfg: RobustLossConfig = RobustLossConfig(lambda_rho=1.0)) -> np.ndarray:
    """Gradient of ``sum(mask * edge * charbonnier(x_t - warp(x_s, flow)))`` w.r.t. the flow.

    Returns an ``(H, W, 2)`` array; pixels outside the mask or warped out of
    bounds have zero gradient.
    """
    _require_charbonnier_only(cfg)
    x_t, x_s = as_image(x_t, "x_t"), as_image(x_s, "x_s")
    flow = as_flow(flow)
    mask = as_mask(mask)
    check_same_hw(x_t, x_s, flow, mask, names=("x_t", "x_s", "flow", "mask"))
    proj = flow_projection(flow)
    gi, gj = _sampling_derivatives(x_t, x_s, proj.i_hat, proj.j_hat, proj.in_front, mask, cfg)
    return np.stack([gi, gj], axis=-1)


def grad_recon_wrt_disparity(x_t, x_s, depth, pose: Pose, K: Intrinsics, mask,
                             cfg: RobustLossConfig = RobustLossConfig(lambda_rho=1.0)) -> np.ndarray:
    """Gradient of the depth-pose Charbonnier loss w.r.t. disparity ``1 / depth``.

    With ``rho = 1 / depth`` and ``(a, b, c) = R K^-1 [i, j, 1]``, the
    projection is ``i_hat = fx (a + tx rho) / (c + tz rho) + cx`` (similarly
    for ``j_hat``), which gives closed-form coordinate derivatives.
    """
    _require_charbonnier_only(cfg)
    x_t, x_s = as_image(x_t, "x_t"), as_image(x_s, "x_s")
    depth = as_depth(depth)
    mask = as_mask(mask)
    check_same_hw(x_t, x_s, depth, mask, names=("x_t", "x_s", "depth", "mask"))

    rho = 1.0 / depth
    i, j = pixel_grid(*depth.shape)
    ray = np.stack([(i - K.cx) / K.fx, (j - K.cy) / K.fy, np.ones_like(i)], axis=-1)
    rr = ray @ pose.R.T
    tx, ty, tz = pose.t
    den = rr[..., 2] + tz * rho
    in_front = den * depth > 1e-6
    safe = np.where(in_front, den, 1.0)
    i_hat = np.where(in_front, K.fx * (rr[..., 0] + tx * rho) / safe + K.cx, np.nan)
    j_hat = np.where(in_front, K.fy * (rr[..., 1] + ty * rho) / safe + K.cy, np.nan)
    di_drho = K.fx * (tx * rr[..., 2] - tz * rr[..., 0]) / safe ** 2
    dj_drho = K.fy * (ty * rr[..., 2] - tz * rr[..., 1]) / safe ** 2

    gi, gj = _sampling_derivatives(x_t, x_s, i_hat, j_hat, in_front, mask, cfg)
    return gi * di_drho + gj * dj_drho
