"""Ray-cast synthetic rigid scenes with exact ground truth.

Scenes are built from axis-aligned boxes and planes so every ray
intersection is closed form. Textures are a fixed function of the world
point, parametrised by the direction from the world origin, so texture
features have a roughly constant size in pixels regardless of depth and both
views see the same surface pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import Z_EPS, Intrinsics, Pose, compose, invert, rotation_about
from .grids import pixel_grid


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic lattice hash to [0, 1) (splitmix64 finaliser)."""
    with np.errstate(over="ignore"):
        h = (ix.astype(np.int64).astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
             ^ iy.astype(np.int64).astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
             ^ np.uint64(seed & 0xFFFFFFFF) * np.uint64(0x165667B19E3779F9))
        h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        h = h ^ (h >> np.uint64(31))
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _fade(t):
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def value_noise(x: np.ndarray, y: np.ndarray, seed: int) -> np.ndarray:
    """C2-smooth value noise with unit lattice spacing, values in [0, 1]."""
    xf, yf = np.floor(x), np.floor(y)
    tx, ty = _fade(x - xf), _fade(y - yf)
    xi, yi = xf.astype(np.int64), yf.astype(np.int64)
    v00 = _hash01(xi, yi, seed)
    v10 = _hash01(xi + 1, yi, seed)
    v01 = _hash01(xi, yi + 1, seed)
    v11 = _hash01(xi + 1, yi + 1, seed)
    top = v00 + (v10 - v00) * tx
    bot = v01 + (v11 - v01) * tx
    return top + (bot - top) * ty


@dataclass(frozen=True)
class Texture:
    """Procedural RGB texture.

    ``cell`` is the noise lattice spacing (or half the checker period) in
    pixels of a camera at the world origin with focal length
    ``Scene.texture_focal``.
    """

    kind: str = "noise"
    seed: int = 0
    cell: float = 10.0
    contrast: float = 0.6
    base: float = 0.5

    def shade(self, points: np.ndarray, focal: float) -> np.ndarray:
        z = np.maximum(points[..., 2], 1e-3)
        a = focal * points[..., 0] / z / self.cell
        b = focal * points[..., 1] / z / self.cell
        chans = []
        for c in range(3):
            if self.kind == "noise":
                v = value_noise(a, b, self.seed * 3 + c)
            elif self.kind == "checker":
                v = ((np.floor(a) + np.floor(b)) % 2).astype(np.float64)
                v = v if c == 0 else (v + 0.25 * c) % 1.0
            else:
                raise ValueError(f"unknown texture kind {self.kind!r}")
            chans.append(self.base + self.contrast * (v - 0.5))
        return np.clip(np.stack(chans, axis=-1), 0.0, 1.0)


@dataclass(frozen=True)
class Plane:
    """Plane ``X[axis] == offset``, optionally bounded to ``[lo, hi]`` on the other axes."""

    axis: int
    offset: float
    texture: Texture = field(default_factory=Texture)
    lo: tuple = (-np.inf, -np.inf, -np.inf)
    hi: tuple = (np.inf, np.inf, np.inf)

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        d = dirs[..., self.axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = (self.offset - origin[self.axis]) / d
        ok = np.isfinite(lam) & (lam > 0)
        for ax in range(3):
            if ax == self.axis:
                continue
            c = origin[ax] + np.where(ok, lam, 0.0) * dirs[..., ax]
            ok &= (c >= self.lo[ax]) & (c <= self.hi[ax])
        return np.where(ok, lam, np.inf)


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple
    texture: Texture = field(default_factory=Texture)

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - origin) / dirs
            t2 = (hi - origin) / dirs
        tnear = np.fmax.reduce(np.fmin(t1, t2), axis=-1)
        tfar = np.fmin.reduce(np.fmax(t1, t2), axis=-1)
        hit = (tnear <= tfar) & (tnear > 0)
        return np.where(hit, tnear, np.inf)


@dataclass(frozen=True)
class Scene:
    primitives: tuple
    background: Plane
    texture_focal: float = 240.0

    @property
    def all_primitives(self) -> tuple:
        return tuple(self.primitives) + (self.background,)


@dataclass(frozen=True)
class CameraConfig:
    K: Intrinsics
    pose: Pose  # world-from-camera
    height: int
    width: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


def relative_pose(cam_t: CameraConfig, cam_s: CameraConfig) -> Pose:
    """Transform from frame-t camera coordinates to frame-s camera coordinates."""
    return compose(invert(cam_s.pose), cam_t.pose)


def _ray_dirs(cam: CameraConfig, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """World-frame ray directions whose camera-frame z component is 1."""
    K = cam.K
    local = np.stack([(i - K.cx) / K.fx, (j - K.cy) / K.fy, np.ones_like(i)], axis=-1)
    return local @ cam.pose.R.T


def cast(scene: Scene, origin: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First-hit ray parameter and primitive index for every ray."""
    best = np.full(dirs.shape[:-1], np.inf)
    which = np.full(dirs.shape[:-1], -1, dtype=np.intp)
    for k, prim in enumerate(scene.all_primitives):
        lam = prim.intersect(origin, dirs)
        closer = lam < best
        best = np.where(closer, lam, best)
        which = np.where(closer, k, which)
    if np.any(which < 0):
        raise ValueError(f"{int(np.sum(which < 0))} rays miss every primitive; background does not cover the view")
    return best, which


def _first_hit(scene: Scene, cam: CameraConfig):
    i, j = pixel_grid(cam.height, cam.width)
    dirs = _ray_dirs(cam, i, j)
    origin = np.asarray(cam.pose.t)
    lam, which = cast(scene, origin, dirs)
    points = origin + lam[..., None] * dirs
    return lam, which, points


def render(scene: Scene, cam: CameraConfig) -> tuple[np.ndarray, np.ndarray]:
    """Ray-cast an RGB image and the z-depth map of ``cam``."""
    depth, which, points = _first_hit(scene, cam)
    image = np.zeros(depth.shape + (3,))
    for k, prim in enumerate(scene.all_primitives):
        sel = which == k
        if np.any(sel):
            image[sel] = prim.texture.shade(points[sel], scene.texture_focal)
    return image, depth


def _reproject(points: np.ndarray, cam_s: CameraConfig):
    q = (points - cam_s.pose.t) @ cam_s.pose.R
    in_front = q[..., 2] > Z_EPS
    z = np.where(in_front, q[..., 2], 1.0)
    i_hat = cam_s.K.fx * q[..., 0] / z + cam_s.K.cx
    j_hat = cam_s.K.fy * q[..., 1] / z + cam_s.K.cy
    inb = in_front & (i_hat >= 0) & (i_hat <= cam_s.width - 1) & (j_hat >= 0) & (j_hat <= cam_s.height - 1)
    return q, i_hat, j_hat, in_front, inb


def gt_flow(scene: Scene, cam_t: CameraConfig, cam_s: CameraConfig) -> tuple[np.ndarray, np.ndarray]:
    """True flow of each frame-t surface point into frame s, plus validity."""
    _, _, points = _first_hit(scene, cam_t)
    _, i_hat, j_hat, in_front, inb = _reproject(points, cam_s)
    i, j = pixel_grid(cam_t.height, cam_t.width)
    flow = np.zeros(i.shape + (2,))
    flow[..., 0] = np.where(in_front, i_hat - i, 0.0)
    flow[..., 1] = np.where(in_front, j_hat - j, 0.0)
    return flow, inb.astype(np.uint8)


def gt_occlusion(scene: Scene, cam_t: CameraConfig, cam_s: CameraConfig, rel_tol: float = 1e-6) -> np.ndarray:
    """1 where the frame-t surface point is visible from frame s, else 0."""
    _, _, points = _first_hit(scene, cam_t)
    q, i_hat, j_hat, _, inb = _reproject(points, cam_s)
    visible = np.zeros(inb.shape, dtype=np.uint8)
    if np.any(inb):
        dirs = _ray_dirs(cam_s, i_hat[inb], j_hat[inb])
        lam, _ = cast(scene, np.asarray(cam_s.pose.t), dirs)
        z = q[..., 2][inb]
        visible[inb] = (z <= lam + rel_tol * z).astype(np.uint8)
    return visible


# -- random scenes -----------------------------------------------------------

SUITE_HEIGHT = 128
SUITE_WIDTH = 416


def kitti_like_intrinsics(height: int = SUITE_HEIGHT, width: int = SUITE_WIDTH) -> Intrinsics:
    return Intrinsics(0.58 * width, 1.92 * height, 0.5 * width, 0.5 * height)


def _random_scene(rng: np.random.Generator) -> Scene:
    cam_height = rng.uniform(1.4, 1.7)
    seeds = rng.integers(0, 2**31, size=8)
    ground = Plane(1, cam_height, Texture(seed=int(seeds[0]), cell=9.0))
    background = Plane(2, rng.uniform(30.0, 45.0), Texture(seed=int(seeds[1]), cell=11.0, contrast=0.5))
    boxes = []
    for k in range(int(rng.integers(1, 4))):
        z_front = rng.uniform(2.5, 18.0)
        width = rng.uniform(0.8, 2.5)
        height = rng.uniform(0.8, 2.2)
        extent = rng.uniform(0.8, 3.0)
        xc = z_front * rng.uniform(-0.55, 0.55)
        tex = Texture(seed=int(seeds[2 + k]), cell=rng.uniform(8.0, 12.0), contrast=0.6,
                      base=rng.uniform(0.35, 0.65))
        boxes.append(Box((xc - width / 2, cam_height - height, z_front),
                         (xc + width / 2, cam_height, z_front + extent), tex))
    return Scene(tuple([ground] + boxes), background)


def _random_motion(rng: np.random.Generator) -> Pose:
    t = np.array([rng.uniform(-0.45, 0.45), rng.uniform(-0.03, 0.03), rng.uniform(0.0, 0.25)])
    norm = np.linalg.norm(t)
    if norm > 0.5:
        t *= 0.5 / norm
    R = (rotation_about([0, 1, 0], rng.uniform(-0.02, 0.02))
         @ rotation_about([1, 0, 0], rng.uniform(-0.005, 0.005))
         @ rotation_about([0, 0, 1], rng.uniform(-0.005, 0.005)))
    return Pose(R, t)


def suite_instance(seed: int, index: int, height: int = SUITE_HEIGHT, width: int = SUITE_WIDTH,
                   min_occluded: float = 0.01) -> tuple[Scene, CameraConfig, CameraConfig]:
    """Scene ``index`` of the suite for ``seed``; independent of the other members."""
    K = kitti_like_intrinsics(height, width)
    rng = np.random.default_rng([seed, index])
    while True:
        scene = _random_scene(rng)
        cam_t = CameraConfig(K, Pose.identity(), height, width)
        cam_s = CameraConfig(K, _random_motion(rng), height, width)
        occluded = 1.0 - gt_occlusion(scene, cam_t, cam_s).mean()
        if occluded >= min_occluded:
            return scene, cam_t, cam_s


def random_suite(seed: int, n: int, height: int = SUITE_HEIGHT, width: int = SUITE_WIDTH,
                 min_occluded: float = 0.01) -> list[tuple[Scene, CameraConfig, CameraConfig]]:
    """``n`` reproducible (scene, cam_t, cam_s) triples.

    Ground plane, background plane and one to three boxes; camera t sits at the
    world origin and camera s moves by at most 0.5 units and a few hundredths
    of a radian. Scenes with fewer than ``min_occluded`` occluded pixels are
    re-drawn.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return [suite_instance(seed, k, height, width, min_occluded) for k in range(n)]
