"""Geometric occlusion masks from depth and pose.

The frame-t mask is the product of three masks:

* edge    -- the pixel projects outside frame s (or behind its camera)
* overlap -- several frame-t pixels fall into the same bilinear cell of
  frame s; only the nearest one keeps 1
* blank   -- projecting frame s back into frame t leaves the pixel outside
  every bilinear footprint

Repeating the forward/backward projection with already-masked pixels removed
can only grow the masked set, and it stops changing after finitely many
rounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Intrinsics, Pose, ProjectionMap, invert, project_depth
from .grids import as_depth
from .warp import footprint

TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MaskBundle:
    edge: np.ndarray
    overlap: np.ndarray
    blank: np.ndarray
    combined: np.ndarray
    iterations_used: int


def edge_mask(proj: ProjectionMap, target_shape: tuple[int, int] | None = None) -> np.ndarray:
    h, w = target_shape or proj.shape
    return footprint(proj.i_hat, proj.j_hat, proj.in_front, w, h).in_bounds.astype(np.uint8)


def overlap_mask(proj: ProjectionMap, target_shape: tuple[int, int] | None = None,
                 participants: np.ndarray | None = None) -> np.ndarray:
    """Keep only the nearest source pixel of every target cell.

    Pixels are binned by the integer cell ``(floor(i_hat), floor(j_hat))``.
    Within a cell the smallest ``z_hat`` wins; depths within ``TIE_TOL`` are
    resolved in favour of the lower row-major index. Pixels that are not in
    bounds (or not in ``participants``) keep 1 and do not compete.
    """
    h, w = target_shape or proj.shape
    fp = footprint(proj.i_hat, proj.j_hat, proj.in_front, w, h)
    active = fp.in_bounds if participants is None else fp.in_bounds & participants.astype(bool)
    out = np.ones(proj.shape, dtype=np.uint8)
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return out
    # unclamped floor cell: a point on the last row/column has its own cell
    cx = fp.x0 + (fp.wx == 1.0)
    cy = fp.y0 + (fp.wy == 1.0)
    cell = cy.ravel()[idx] * w + cx.ravel()[idx]
    z = proj.z_hat.ravel()[idx]

    zmin = np.full(h * w, np.inf)
    np.minimum.at(zmin, cell, z)
    contender = z <= zmin[cell] + TIE_TOL
    winner = np.full(h * w, np.iinfo(np.intp).max, dtype=np.intp)
    np.minimum.at(winner, cell[contender], idx[contender])

    flat = out.ravel()
    flat[idx] = (winner[cell] == idx).astype(np.uint8)
    return out


def coverage_mask(proj: ProjectionMap, target_shape: tuple[int, int],
                  participants: np.ndarray | None = None) -> np.ndarray:
    """1 at every target pixel with positive bilinear weight from some projection."""
    h, w = target_shape
    fp = footprint(proj.i_hat, proj.j_hat, proj.in_front, w, h)
    active = fp.in_bounds if participants is None else fp.in_bounds & participants.astype(bool)
    cov = np.zeros((h, w), dtype=np.uint8)
    x0, y0 = fp.x0[active], fp.y0[active]
    for (dy, dx), wgt in zip(((0, 0), (0, 1), (1, 0), (1, 1)), fp.weights()):
        hit = wgt[active] > 0
        cov[y0[hit] + dy, x0[hit] + dx] = 1
    return cov


def blank_mask(depth_s, T_s_to_t: Pose, K: Intrinsics,
               target_shape: tuple[int, int] | None = None) -> np.ndarray:
    depth_s = as_depth(depth_s, "depth_s")
    proj = project_depth(depth_s, T_s_to_t, K)
    return coverage_mask(proj, target_shape or depth_s.shape)


def occlusion_mask(depth_t, depth_s, T_t_to_s: Pose, K: Intrinsics,
                   iterations: int | None = 1) -> MaskBundle:
    """Edge, overlap, blank and combined masks for frame t.

    ``iterations`` bounds the number of mutual-projection rounds; ``None``
    runs until nothing changes. Rounds beyond the first remove masked frame-t
    pixels before projecting into s, blank out frame-s pixels that lose all
    support, and remove those before projecting back into t.
    """
    depth_t = as_depth(depth_t, "depth_t")
    depth_s = as_depth(depth_s, "depth_s")
    shape_t, shape_s = depth_t.shape, depth_s.shape
    limit = shape_t[0] * shape_t[1] + shape_s[0] * shape_s[1] + 1 if iterations is None else iterations
    if limit < 1:
        raise ValueError("iterations must be >= 1")

    fwd = project_depth(depth_t, T_t_to_s, K)
    bwd = project_depth(depth_s, invert(T_t_to_s), K)

    edge = edge_mask(fwd, shape_s)
    overlap = overlap_mask(fwd, shape_s)
    blank = coverage_mask(bwd, shape_t)
    combined = edge * overlap * blank
    valid_s = np.ones(shape_s, dtype=np.uint8)
    used = 1

    while used < limit:
        valid_s_next = valid_s & coverage_mask(fwd, shape_s, participants=combined)
        overlap_next = overlap & overlap_mask(fwd, shape_s, participants=combined)
        blank_next = blank & coverage_mask(bwd, shape_t, participants=valid_s_next)
        combined_next = edge * overlap_next * blank_next
        if np.array_equal(combined_next, combined) and np.array_equal(valid_s_next, valid_s):
            break
        valid_s, overlap, blank, combined = valid_s_next, overlap_next, blank_next, combined_next
        used += 1

    return MaskBundle(edge, overlap, blank, combined, used)
