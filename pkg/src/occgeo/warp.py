"""Bilinear inverse warping and image pyramids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import ProjectionMap
from .errors import DataError, DimensionMismatch
from .grids import as_flow, as_image, check_same_hw, pixel_grid

# coordinates this close to an integer are treated as lying on it, so that
# roundoff in a projection chain does not move a pixel off the border or
# into the neighbouring cell
SNAP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SampleFootprint:
    """Bilinear neighbourhood of every projected point.

    ``x0, y0`` index the top-left neighbour; the other three are at
    ``x0 + 1`` and/or ``y0 + 1``. ``wx, wy`` are the fractional offsets. Only
    entries where ``in_bounds`` is set are meaningful.
    """

    x0: np.ndarray
    y0: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    in_bounds: np.ndarray

    def weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Weights of the (tl, tr, bl, br) neighbours."""
        wx, wy = self.wx, self.wy
        return (1.0 - wx) * (1.0 - wy), wx * (1.0 - wy), (1.0 - wx) * wy, wx * wy


def _snap(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    r = np.rint(x)
    with np.errstate(invalid="ignore"):
        return np.where(np.abs(x - r) <= SNAP_TOL, r, x)


def footprint(i_hat, j_hat, in_front, width: int, height: int) -> SampleFootprint:
    """Bilinear footprint in a ``height x width`` target grid.

    A point exactly on the last column/row is in bounds; its top-left cell is
    clamped so the footprint stays inside the grid with a degenerate weight.
    Coordinates within ``SNAP_TOL`` of an integer are moved onto it.
    """
    if width < 2 or height < 2:
        raise DataError("sampling grid needs at least 2x2 pixels")
    in_front = np.asarray(in_front, dtype=bool)
    i_hat, j_hat = _snap(i_hat), _snap(j_hat)
    inb = in_front & (i_hat >= 0) & (i_hat <= width - 1) & (j_hat >= 0) & (j_hat <= height - 1)
    x = np.where(inb, i_hat, 0.0)
    y = np.where(inb, j_hat, 0.0)
    x0 = np.minimum(np.floor(x), width - 2).astype(np.intp)
    y0 = np.minimum(np.floor(y), height - 2).astype(np.intp)
    return SampleFootprint(x0, y0, x - x0, y - y0, inb)


def sample_footprint(source: np.ndarray, fp: SampleFootprint) -> np.ndarray:
    """Weighted sum of the four neighbours; zero outside ``fp.in_bounds``."""
    x0, y0 = fp.x0, fp.y0
    w_tl, w_tr, w_bl, w_br = (w[..., None] for w in fp.weights())
    out = (w_tl * source[y0, x0] + w_tr * source[y0, x0 + 1]
           + w_bl * source[y0 + 1, x0] + w_br * source[y0 + 1, x0 + 1])
    return np.where(fp.in_bounds[..., None], out, 0.0)


def bilinear_sample(source, proj: ProjectionMap) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct an image by sampling ``source`` at ``proj`` coordinates.

    Returns the reconstruction and the edge mask (1 where the projection is in
    front of the camera and inside the source image). Masked pixels are 0.
    """
    source = as_image(source, "source")
    h, w = source.shape[:2]
    if proj.shape != (h, w):
        raise DimensionMismatch(f"projection map {proj.shape} does not match source {(h, w)}")
    fp = footprint(proj.i_hat, proj.j_hat, proj.in_front, w, h)
    return sample_footprint(source, fp), fp.in_bounds.astype(np.uint8)


def flow_projection(flow) -> ProjectionMap:
    flow = as_flow(flow)
    i, j = pixel_grid(*flow.shape[:2])
    ones = np.ones(flow.shape[:2], dtype=bool)
    return ProjectionMap(i + flow[..., 0], j + flow[..., 1], np.ones(flow.shape[:2]), ones)


def warp_with_flow(source, flow) -> tuple[np.ndarray, np.ndarray]:
    check_same_hw(source, flow, names=("source", "flow"))
    return bilinear_sample(source, flow_projection(flow))


def downsample(grid: np.ndarray, reduce: str = "mean") -> np.ndarray:
    """2x2 pooling over the leading two axes; odd trailing row/column dropped."""
    grid = np.asarray(grid)
    h, w = grid.shape[0] // 2, grid.shape[1] // 2
    if h < 1 or w < 1:
        raise DataError(f"cannot pool a {grid.shape[:2]} grid")
    g = grid[:2 * h, :2 * w]
    blocks = g.reshape((h, 2, w, 2) + g.shape[2:])
    if reduce == "mean":
        return (blocks[:, 0, :, 0] + blocks[:, 0, :, 1] + blocks[:, 1, :, 0] + blocks[:, 1, :, 1]) / 4.0
    if reduce == "min":
        return blocks.min(axis=(1, 3))
    raise ValueError(f"unknown reduction {reduce!r}")


def pyramid(image, levels: int) -> list[np.ndarray]:
    """``levels`` images, each a 2x2 mean pooling of the previous one."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    out = [as_image(image)]
    for k in range(1, levels):
        prev = out[-1]
        if prev.shape[0] // 2 < 2 or prev.shape[1] // 2 < 2:
            raise DataError(f"level {k} would be smaller than 2x2 (from {prev.shape[:2]})")
        out.append(downsample(prev))
    return out


def mask_pyramid(mask, levels: int) -> list[np.ndarray]:
    """Min-pooled masks: a pixel masked at full resolution stays masked."""
    out = [np.asarray(mask, dtype=np.uint8)]
    for _ in range(1, levels):
        out.append(downsample(out[-1], reduce="min"))
    return out


def flow_pyramid(flow, levels: int) -> list[np.ndarray]:
    """Mean-pooled flows rescaled to each level's pixel units."""
    out = [as_flow(flow)]
    for _ in range(1, levels):
        out.append(downsample(out[-1]) / 2.0)
    return out
