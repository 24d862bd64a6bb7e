"""Readers and writers for the on-disk grid formats.

* PFM (``Pf`` only, little-endian, bottom-up rows) for depth, disparity and
  error maps
* Middlebury ``.flo`` for flow fields
* binary PGM (P5) with values {0, 255} for masks
* binary PPM (P6) or PNG for photographs
* JSON for intrinsics plus the frame-to-frame pose
* plain text for pose trajectories, one row-major 3x4 matrix per line

All binary floats are float32 little-endian on disk and float64 in memory.
"""

from __future__ import annotations

import json
import os
import re

import numpy as np

from .camera import Intrinsics, Pose, check_rotation
from .errors import (
    BadMagic,
    DataError,
    MalformedHeader,
    MissingField,
    NonBinaryMask,
    NonFiniteValue,
    Truncated,
)
from .grids import as_flow, as_image, as_mask

FLO_MAGIC = 202021.25
CAMERA_ROTATION_TOL = 1e-6


def _read_bytes(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _netpbm_header(data: bytes, n_fields: int, path) -> tuple[list[bytes], int]:
    """Parse ``n_fields`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset of the raster (one whitespace byte after
    the last token).
    """
    tokens = []
    pos = 0
    while len(tokens) < n_fields:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*([^\s#]+)").match(data, pos)
        if m is None:
            raise MalformedHeader(f"{path}: truncated netpbm header")
        tokens.append(m.group(2))
        pos = m.end()
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise MalformedHeader(f"{path}: missing whitespace after header")
    return tokens, pos + 1


# -- PFM ---------------------------------------------------------------------

def read_pfm(path) -> np.ndarray:
    data = _read_bytes(path)
    lines = data.split(b"\n", 3)
    if len(lines) < 4:
        raise MalformedHeader(f"{path}: PFM header needs three lines")
    kind, dims, scale, payload = lines
    kind = kind.strip()
    if kind == b"PF":
        raise MalformedHeader(f"{path}: color PFM ('PF') rejected, expected single-channel 'Pf'")
    if kind != b"Pf":
        raise MalformedHeader(f"{path}: bad PFM identifier {kind!r}")
    try:
        width, height = (int(v) for v in dims.split())
        scale = float(scale)
    except ValueError as e:
        raise MalformedHeader(f"{path}: bad PFM dimensions or scale") from e
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"{path}: non-positive PFM dimensions")
    if not scale < 0:
        raise MalformedHeader(f"{path}: PFM scale must be negative (little-endian), got {scale}")
    n = width * height
    if len(payload) < 4 * n:
        raise Truncated(f"{path}: expected {4 * n} payload bytes, found {len(payload)}")
    if len(payload) > 4 * n:
        raise MalformedHeader(f"{path}: {len(payload) - 4 * n} trailing bytes after PFM payload")
    arr = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{path}: PFM contains non-finite values")
    return np.flipud(arr).astype(np.float64)


def write_pfm(grid, path) -> None:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 3 and grid.shape[2] == 1:
        grid = grid[:, :, 0]
    if grid.ndim != 2:
        raise DataError(f"PFM needs a single-channel grid, got shape {grid.shape}")
    if not np.all(np.isfinite(grid)):
        raise NonFiniteValue("refusing to write non-finite values to PFM")
    h, w = grid.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(np.flipud(grid), dtype="<f4").tobytes())


# -- Middlebury .flo ---------------------------------------------------------

def read_flo(path) -> np.ndarray:
    data = _read_bytes(path)
    if len(data) < 12:
        raise Truncated(f"{path}: .flo header needs 12 bytes, found {len(data)}")
    magic = np.frombuffer(data[:4], dtype="<f4")[0]
    if magic != np.float32(FLO_MAGIC):
        raise BadMagic(f"{path}: bad .flo magic {magic!r}")
    width, height = (int(v) for v in np.frombuffer(data[4:12], dtype="<i4"))
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"{path}: non-positive .flo dimensions {width}x{height}")
    n = 8 * width * height
    if len(data) - 12 < n:
        raise Truncated(f"{path}: expected {n} payload bytes, found {len(data) - 12}")
    if len(data) - 12 > n:
        raise MalformedHeader(f"{path}: trailing bytes after .flo payload")
    flow = np.frombuffer(data[12:], dtype="<f4").reshape(height, width, 2)
    if not np.all(np.isfinite(flow)):
        raise NonFiniteValue(f"{path}: .flo contains non-finite values")
    return flow.astype(np.float64)


def write_flo(flow, path) -> None:
    flow = as_flow(flow)
    h, w = flow.shape[:2]
    with open(path, "wb") as f:
        f.write(np.array([FLO_MAGIC], dtype="<f4").tobytes())
        f.write(np.array([w, h], dtype="<i4").tobytes())
        f.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())


# -- netpbm masks and images -------------------------------------------------

def _read_netpbm(path, magic: bytes, channels: int) -> np.ndarray:
    data = _read_bytes(path)
    if data[:2] != magic:
        raise MalformedHeader(f"{path}: expected {magic.decode()} file, found {data[:2]!r}")
    tokens, offset = _netpbm_header(data, 4, path)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise MalformedHeader(f"{path}: bad netpbm header") from e
    if maxval != 255:
        raise MalformedHeader(f"{path}: maxval must be 255, got {maxval}")
    n = width * height * channels
    raster = data[offset:]
    if len(raster) < n:
        raise Truncated(f"{path}: expected {n} raster bytes, found {len(raster)}")
    return np.frombuffer(raster[:n], dtype=np.uint8).reshape(height, width, channels)


def _write_netpbm(path, magic: bytes, raster: np.ndarray) -> None:
    h, w = raster.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + f"\n{w} {h}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(raster, dtype=np.uint8).tobytes())


def read_mask_pgm(path) -> np.ndarray:
    raw = _read_netpbm(path, b"P5", 1)[:, :, 0]
    if not np.all((raw == 0) | (raw == 255)):
        bad = np.unique(raw[(raw != 0) & (raw != 255)])[:5].tolist()
        raise NonBinaryMask(f"{path}: mask values must be 0 or 255, found {bad}")
    return (raw == 255).astype(np.uint8)


def write_mask_pgm(mask, path) -> None:
    mask = as_mask(mask)
    _write_netpbm(path, b"P5", mask * np.uint8(255))


def read_image(path) -> np.ndarray:
    """Read a P6 PPM, P5 PGM or PNG as ``(H, W, C)`` intensities in [0, 1]."""
    head = _read_bytes(path)[:8]
    if head[:2] == b"P6":
        raster = _read_netpbm(path, b"P6", 3)
    elif head[:2] == b"P5":
        raster = _read_netpbm(path, b"P5", 1)
    elif head == b"\x89PNG\r\n\x1a\n":
        from PIL import Image as PILImage

        with PILImage.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            raster = np.asarray(im, dtype=np.uint8)
        if raster.ndim == 2:
            raster = raster[:, :, None]
    else:
        raise MalformedHeader(f"{path}: unsupported image format")
    return as_image(raster.astype(np.float64) / 255.0, name=str(path))


def _to_bytes(image: np.ndarray) -> np.ndarray:
    image = as_image(image)
    return np.rint(image * 255.0).astype(np.uint8)


def write_image(image, path) -> None:
    """Write P6 (3 channels) or P5 (1 channel); PNG when the suffix is ``.png``."""
    raster = _to_bytes(image)
    if os.fspath(path).lower().endswith(".png"):
        from PIL import Image as PILImage

        arr = raster[:, :, 0] if raster.shape[2] == 1 else raster
        PILImage.fromarray(arr).save(path, format="PNG")
    elif raster.shape[2] == 3:
        _write_netpbm(path, b"P6", raster)
    else:
        _write_netpbm(path, b"P5", raster)


# -- camera JSON -------------------------------------------------------------

def _nearest_rotation(R: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def read_camera_json(path) -> tuple[Intrinsics, Pose]:
    """Read ``{"fx", "fy", "cx", "cy", "pose": [12 numbers]}``.

    ``pose`` is the row-major ``[R|t]`` mapping frame-t camera coordinates
    into frame-s camera coordinates. A rotation within 1e-6 of orthonormal is
    accepted and snapped to the nearest exact rotation.
    """
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: invalid JSON: {e}") from e
    return camera_from_dict(obj, source=str(path))


def camera_from_dict(obj: dict, source: str = "camera") -> tuple[Intrinsics, Pose]:
    if not isinstance(obj, dict):
        raise DataError(f"{source}: expected a JSON object")
    for key in ("fx", "fy", "cx", "cy", "pose"):
        if key not in obj:
            raise MissingField(f"{source}: missing field '{key}'")
    try:
        fx, fy, cx, cy = (float(obj[k]) for k in ("fx", "fy", "cx", "cy"))
        m = np.asarray(obj["pose"], dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise DataError(f"{source}: non-numeric camera field") from e
    K = Intrinsics(fx, fy, cx, cy)
    if m.shape != (12,):
        raise DataError(f"{source}: field 'pose' must hold 12 numbers, got {m.size}")
    m = m.reshape(3, 4)
    check_rotation(m[:, :3], tol=CAMERA_ROTATION_TOL)
    return K, Pose(_nearest_rotation(m[:, :3]), m[:, 3])


def camera_to_dict(K: Intrinsics, pose: Pose) -> dict:
    m = np.hstack([pose.R, pose.t[:, None]])
    return {"fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy,
            "pose": [float(v) for v in m.ravel()]}


def write_camera_json(K: Intrinsics, pose: Pose, path) -> None:
    with open(path, "w") as f:
        json.dump(camera_to_dict(K, pose), f, indent=2, sort_keys=True)
        f.write("\n")


# -- pose trajectories -------------------------------------------------------

WORLD_FROM_CAMERA = "world-from-camera"
CAMERA_FROM_WORLD = "camera-from-world"


def read_pose_text(path) -> tuple[list[Pose], str]:
    """Read a trajectory file.

    An optional header line ``# world-from-camera`` or ``# camera-from-world``
    declares the convention (default world-from-camera). Every other
    non-empty, non-comment line holds 12 numbers.
    """
    convention = WORLD_FROM_CAMERA
    poses = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                tag = s.lstrip("#").strip().lower()
                if tag in (WORLD_FROM_CAMERA, CAMERA_FROM_WORLD):
                    convention = tag
                continue
            try:
                vals = [float(v) for v in s.split()]
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: non-numeric pose entry") from e
            if len(vals) != 12:
                raise DataError(f"{path}:{lineno}: expected 12 numbers, got {len(vals)}")
            m = np.asarray(vals).reshape(3, 4)
            check_rotation(m[:, :3], tol=CAMERA_ROTATION_TOL)
            poses.append(Pose(_nearest_rotation(m[:, :3]), m[:, 3]))
    return poses, convention


def write_pose_text(poses, path, convention: str = WORLD_FROM_CAMERA) -> None:
    with open(path, "w") as f:
        f.write(f"# {convention}\n")
        for p in poses:
            m = np.hstack([p.R, p.t[:, None]])
            f.write(" ".join(repr(float(v)) for v in m.ravel()) + "\n")


__all__ = [
    "read_pfm", "write_pfm", "read_flo", "write_flo", "read_mask_pgm", "write_mask_pgm",
    "read_image", "write_image", "read_camera_json", "write_camera_json",
    "camera_from_dict", "camera_to_dict", "read_pose_text", "write_pose_text",
]
