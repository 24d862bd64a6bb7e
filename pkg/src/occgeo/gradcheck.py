"""Central finite-difference checks of the analytic reconstruction gradients.

The finite-difference side evaluates the scalar loss through the public
forward operations only (warp/projection, bilinear sampling, robust penalty),
one coordinate at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import Intrinsics, Pose, project_depth, rotation_about
from .gradients import grad_recon_wrt_disparity, grad_recon_wrt_flow
from .losses import RobustLossConfig, robust_penalty, total
from .warp import bilinear_sample, warp_with_flow

FD_STEP = 1e-4
GRID_OFFSET = 0.01
CHARBONNIER_ONLY = RobustLossConfig(lambda_rho=1.0)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``max |analytic - numeric| / max |numeric|``."""
    scale = float(np.max(np.abs(numeric)))
    diff = float(np.max(np.abs(analytic - numeric)))
    if scale == 0.0:
        return diff
    return diff / scale


def _off_grid(x: np.ndarray) -> np.ndarray:
    frac = x - np.floor(x)
    return (frac >= GRID_OFFSET) & (frac <= 1.0 - GRID_OFFSET)


@dataclass
class FlowInstance:
    x_t: np.ndarray
    x_s: np.ndarray
    flow: np.ndarray
    mask: np.ndarray


@dataclass
class DisparityInstance:
    x_t: np.ndarray
    x_s: np.ndarray
    depth: np.ndarray
    pose: Pose
    K: Intrinsics
    mask: np.ndarray


def random_flow_instance(rng: np.random.Generator, size: int = 16) -> FlowInstance:
    x_t = rng.uniform(0, 1, (size, size, 3))
    x_s = rng.uniform(0, 1, (size, size, 3))
    flow = rng.uniform(-3, 3, (size, size, 2))
    j, i = np.mgrid[0:size, 0:size]
    for c, base in ((0, i), (1, j)):
        bad = ~_off_grid(base + flow[..., c])
        flow[..., c][bad] += 0.5
    mask = (rng.uniform(size=(size, size)) < 0.8).astype(np.uint8)
    return FlowInstance(x_t, x_s, flow, mask)


def random_disparity_instance(rng: np.random.Generator, size: int = 16) -> DisparityInstance:
    K = Intrinsics(1.2 * size, 1.2 * size, (size - 1) / 2, (size - 1) / 2)
    R = rotation_about(rng.normal(size=3), rng.uniform(0.0, 0.03))
    t = rng.normal(size=3)
    t *= rng.uniform(0.05, 0.15) / np.linalg.norm(t)
    pose = Pose(R, t)
    depth = rng.uniform(2.0, 10.0, (size, size))
    for _ in range(50):
        proj = project_depth(depth, pose, K)
        bad = proj.in_front & ~(_off_grid(proj.i_hat) & _off_grid(proj.j_hat))
        if not bad.any():
            break
        depth[bad] = rng.uniform(2.0, 10.0, int(bad.sum()))
    proj = project_depth(depth, pose, K)
    usable = ~proj.in_front | (_off_grid(proj.i_hat) & _off_grid(proj.j_hat))
    mask = ((rng.uniform(size=(size, size)) < 0.8) & usable).astype(np.uint8)
    x_t = rng.uniform(0, 1, (size, size, 3))
    x_s = rng.uniform(0, 1, (size, size, 3))
    return DisparityInstance(x_t, x_s, depth, pose, K, mask)


def flow_objective(inst: FlowInstance, flow: np.ndarray, edge: np.ndarray) -> float:
    x_hat, _ = warp_with_flow(inst.x_s, flow)
    return total(inst.mask * edge * robust_penalty(inst.x_t, x_hat, CHARBONNIER_ONLY))


def disparity_objective(inst: DisparityInstance, disparity: np.ndarray, edge: np.ndarray) -> float:
    x_hat, _ = bilinear_sample(inst.x_s, project_depth(1.0 / disparity, inst.pose, inst.K))
    return total(inst.mask * edge * robust_penalty(inst.x_t, x_hat, CHARBONNIER_ONLY))


def fd_flow_gradient(inst: FlowInstance, h: float = FD_STEP) -> np.ndarray:
    _, edge = warp_with_flow(inst.x_s, inst.flow)
    grad = np.zeros_like(inst.flow)
    for idx in np.ndindex(*inst.flow.shape):
        f = inst.flow.copy()
        f[idx] += h
        up = flow_objective(inst, f, edge)
        f[idx] -= 2 * h
        down = flow_objective(inst, f, edge)
        grad[idx] = (up - down) / (2 * h)
    return grad


def fd_disparity_gradient(inst: DisparityInstance, h: float = FD_STEP) -> np.ndarray:
    rho = 1.0 / inst.depth
    _, edge = bilinear_sample(inst.x_s, project_depth(inst.depth, inst.pose, inst.K))
    grad = np.zeros_like(rho)
    for idx in np.ndindex(*rho.shape):
        r = rho.copy()
        r[idx] += h
        up = disparity_objective(inst, r, edge)
        r[idx] -= 2 * h
        down = disparity_objective(inst, r, edge)
        grad[idx] = (up - down) / (2 * h)
    return grad


def run(size: int = 16, trials: int = 10, seed: int = 0) -> dict:
    """Relative errors of both analytic gradients over random instances."""
    rng = np.random.default_rng(seed)
    flow_err, disp_err = [], []
    for _ in range(trials):
        fi = random_flow_instance(rng, size)
        analytic = grad_recon_wrt_flow(fi.x_t, fi.x_s, fi.flow, fi.mask, CHARBONNIER_ONLY)
        flow_err.append(relative_error(analytic, fd_flow_gradient(fi)))

        di = random_disparity_instance(rng, size)
        analytic = grad_recon_wrt_disparity(di.x_t, di.x_s, di.depth, di.pose, di.K, di.mask, CHARBONNIER_ONLY)
        disp_err.append(relative_error(analytic, fd_disparity_gradient(di)))

    def summary(errs):
        return {"max_rel_err": max(errs), "mean_rel_err": math.fsum(errs) / len(errs)}

    return {"size": size, "trials": trials, "seed": seed, "step": FD_STEP,
            "flow": summary(flow_err), "disparity": summary(disp_err),
            "max_rel_err": max(flow_err + disp_err)}
