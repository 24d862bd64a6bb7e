"""Pinhole camera, rigid transforms, and the depth-pose projection chain.

Pixel ``(i, j)`` is (column, row) with centers at integer coordinates.
A ``Pose`` maps points from one camera frame into another:
``q = R @ p + t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateIntrinsics, NotARotation
from .grids import as_depth, pixel_grid

Z_EPS = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in vals):
            raise DegenerateIntrinsics("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise DegenerateIntrinsics(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


def check_rotation(R: np.ndarray, tol: float = 1e-9) -> None:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise NotARotation("rotation must be a finite 3x3 matrix")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise NotARotation("rotation is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise NotARotation(f"rotation determinant is {np.linalg.det(R):.6g}, expected +1")


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``p -> R @ p + t``."""

    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.R, dtype=np.float64)
        t = np.array(self.t, dtype=np.float64).reshape(3)
        check_rotation(R)
        if not np.all(np.isfinite(t)):
            raise NotARotation("translation must be finite")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        """From a 3x4 ``[R|t]`` or 4x4 homogeneous matrix."""
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.t
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.R.T + self.t

    def __repr__(self) -> str:
        return f"Pose(R={self.R.tolist()}, t={self.t.tolist()})"


def translation(tx: float, ty: float = 0.0, tz: float = 0.0) -> Pose:
    return Pose(np.eye(3), [tx, ty, tz])


def rotation_about(axis, angle: float) -> np.ndarray:
    """Right-handed rotation matrix (Rodrigues)."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)


def compose(a: Pose, b: Pose) -> Pose:
    """Transform applying ``b`` first, then ``a``."""
    return Pose(a.R @ b.R, a.R @ b.t + a.t)


def invert(T: Pose) -> Pose:
    return Pose(T.R.T, -T.R.T @ T.t)


@dataclass(frozen=True, eq=False)
class ProjectionMap:
    """Continuous target coordinates of every source pixel.

    ``i_hat``/``j_hat`` are NaN where ``in_front`` is False.
    """

    i_hat: np.ndarray
    j_hat: np.ndarray
    z_hat: np.ndarray
    in_front: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.i_hat.shape

    @property
    def height(self) -> int:
        return self.i_hat.shape[0]

    @property
    def width(self) -> int:
        return self.i_hat.shape[1]


def backproject(depth, K: Intrinsics) -> np.ndarray:
    """Camera-frame point per pixel, shape ``(H, W, 3)``; z equals depth."""
    depth = as_depth(depth)
    i, j = pixel_grid(*depth.shape)
    pts = np.empty(depth.shape + (3,))
    pts[..., 0] = depth * ((i - K.cx) / K.fx)
    pts[..., 1] = depth * ((j - K.cy) / K.fy)
    pts[..., 2] = depth
    return pts


def transform_points(points: np.ndarray, T: Pose) -> np.ndarray:
    return T.apply(np.asarray(points, dtype=np.float64))


def project(points: np.ndarray, K: Intrinsics, z_eps: float = Z_EPS) -> ProjectionMap:
    if not z_eps > 0:
        raise ValueError("z_eps must be positive")
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    in_front = z > z_eps
    safe_z = np.where(in_front, z, 1.0)
    i_hat = np.where(in_front, K.fx * points[..., 0] / safe_z + K.cx, np.nan)
    j_hat = np.where(in_front, K.fy * points[..., 1] / safe_z + K.cy, np.nan)
    return ProjectionMap(i_hat, j_hat, z.copy(), in_front)


def project_depth(depth, T: Pose, K: Intrinsics, z_eps: float = Z_EPS) -> ProjectionMap:
    """Backproject a depth map, move it by ``T`` and project it again."""
    return project(transform_points(backproject(depth, K), T), K, z_eps)


def rigid_flow(depth_t, T: Pose, K: Intrinsics, z_eps: float = Z_EPS) -> tuple[np.ndarray, np.ndarray]:
    """Flow induced by camera motion ``T`` over a static scene.

    Returns ``(flow, valid)``; pixels landing behind the camera get zero flow
    and ``valid == 0``.
    """
    proj = project_depth(depth_t, T, K, z_eps)
    i, j = pixel_grid(*proj.shape)
    flow = np.zeros(proj.shape + (2,))
    flow[..., 0] = np.where(proj.in_front, proj.i_hat - i, 0.0)
    flow[..., 1] = np.where(proj.in_front, proj.j_hat - j, 0.0)
    return flow, proj.in_front.astype(np.uint8)
