"""Validators for the dense grid types shared across the package.

Grids are plain numpy arrays with fixed conventions:

* image   -- ``(H, W, C)`` float64 in ``[0, 1]``, ``C`` in ``{1, 3}``
* depth   -- ``(H, W)`` float64, strictly positive
* flow    -- ``(H, W, 2)`` float64, ``[..., 0]`` horizontal (u), ``[..., 1]`` vertical (v)
* mask    -- ``(H, W)`` uint8 with values in ``{0, 1}``
* errors  -- ``(H, W)`` float64, non-negative

Pixel ``(i, j)`` is column ``i`` (x) and row ``j`` (y); array indexing is
therefore ``grid[j, i]``.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, DimensionMismatch, NonBinaryMask, NonFiniteValue


def _finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise NonFiniteValue(f"{what} contains non-finite values")


def as_image(a, name: str = "image") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[2] not in (1, 3):
        raise DataError(f"{name}: expected (H, W) or (H, W, 1|3) array, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DataError(f"{name}: empty image")
    _finite(a, name)
    if a.min() < 0.0 or a.max() > 1.0:
        raise DataError(f"{name}: intensities must lie in [0, 1]")
    return a


def as_depth(a, name: str = "depth") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DataError(f"{name}: expected (H, W) array, got shape {a.shape}")
    _finite(a, name)
    if a.size and a.min() <= 0.0:
        raise DataError(f"{name}: values must be strictly positive")
    return a


def as_flow(a, name: str = "flow") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] != 2:
        raise DataError(f"{name}: expected (H, W, 2) array, got shape {a.shape}")
    _finite(a, name)
    return a


def as_mask(a, name: str = "mask") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise DataError(f"{name}: expected (H, W) array, got shape {a.shape}")
    if a.dtype == bool:
        return a.astype(np.uint8)
    if not np.all((a == 0) | (a == 1)):
        raise NonBinaryMask(f"{name}: values must be exactly 0 or 1")
    return a.astype(np.uint8)


def check_same_hw(*grids, names=None) -> tuple[int, int]:
    shapes = [np.shape(g)[:2] for g in grids]
    if len(set(shapes)) != 1:
        label = ", ".join(names) if names else "grids"
        raise DimensionMismatch(f"{label}: spatial shapes differ: {shapes}")
    return shapes[0]


def pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Column and row coordinate arrays ``(i, j)``, each of shape ``(H, W)``."""
    j, i = np.mgrid[0:height, 0:width]
    return i.astype(np.float64), j.astype(np.float64)
