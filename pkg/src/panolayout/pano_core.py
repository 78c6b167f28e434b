"""Equirectangular grid geometry.

Conventions used throughout the package:

* grids are numpy arrays of shape ``(H, W)`` or ``(H, W, C)``, row ``v`` is the
  latitude axis and column ``u`` the azimuth axis (which wraps);
* ``phi`` in ``[0, 2*pi)`` is the azimuth, ``theta`` in ``[0, pi]`` the polar
  angle, 0 at the zenith (+y) and pi at the nadir;
* Cartesian frame has ``y`` up: ``x = r sin(phi) sin(theta)``,
  ``y = r cos(theta)``, ``z = r cos(phi) sin(theta)``;
* pixel centers sit at ``((u + 0.5) * 2pi / W, (v + 0.5) * pi / H)``.

Depth holes are stored as 0 or NaN and turned into validity masks here.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

ArrayLike = Union[float, np.ndarray]


class DomainError(ValueError):
    """Raised when an argument lies outside an operation's domain."""


@dataclass(frozen=True)
class AngularCoord:
    phi: float
    theta: float


@dataclass(frozen=True)
class StructuredPointCloud:
    """Lifted depth map.

    Attributes:
        points: ``(H, W, 3)`` Cartesian coordinates, NaN where invalid.
        valid: ``(H, W)`` boolean mask.
    """

    points: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.valid.shape


def check_grid(grid: np.ndarray, channels: int | None = None) -> Tuple[int, int]:
    """Validate an equirectangular grid and return ``(H, W)``.

    A width other than twice the height only triggers a warning.
    """
    grid = np.asarray(grid)
    if grid.ndim not in (2, 3):
        raise DomainError(f"grid must be 2-D or 3-D, got shape {grid.shape}")
    h, w = grid.shape[:2]
    if w < 2 or h < 1:
        raise DomainError(f"grid needs W >= 2 and H >= 1, got {w}x{h}")
    if channels is not None:
        c = 1 if grid.ndim == 2 else grid.shape[2]
        if c != channels:
            raise DomainError(f"expected {channels} channel(s), got {c}")
    if w != 2 * h:
        logger.warning("equirectangular grid is %dx%d, expected W = 2H", w, h)
    return h, w


def valid_depth_mask(depth: np.ndarray) -> np.ndarray:
    """True where depth is finite and strictly positive."""
    depth = np.asarray(depth, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return np.isfinite(depth) & (depth > 0)


def pix_to_ang(u: ArrayLike, v: ArrayLike, width: int, height: int) -> Tuple[ArrayLike, ArrayLike]:
    """Pixel indices to ``(phi, theta)`` at pixel centers.

    Raises:
        DomainError: if any index lies outside ``[0, W) x [0, H)``.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    v_arr = np.asarray(v, dtype=np.float64)
    if np.any(u_arr < 0) or np.any(u_arr >= width) or np.any(v_arr < 0) or np.any(v_arr >= height):
        raise DomainError(f"pixel ({u}, {v}) outside {width}x{height} grid")
    phi = (u_arr + 0.5) * TWO_PI / width
    theta = (v_arr + 0.5) * math.pi / height
    if phi.ndim == 0:
        return float(phi), float(theta)
    return phi, theta


def ang_to_pix(phi: ArrayLike, theta: ArrayLike, width: int, height: int) -> Tuple[ArrayLike, ArrayLike]:
    """Angular coordinates to continuous pixel coordinates.

    ``u`` wraps into ``[0, W)``; ``v`` is clamped to ``[0, H - 1]``.
    """
    u = np.mod(np.asarray(phi, dtype=np.float64) * width / TWO_PI - 0.5, width)
    v = np.clip(np.asarray(theta, dtype=np.float64) * height / math.pi - 0.5, 0.0, height - 1)
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def sph_to_cart(r: ArrayLike, phi: ArrayLike, theta: ArrayLike) -> np.ndarray:
    """Spherical to Cartesian; the last axis of the result holds ``(x, y, z)``."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(~(r > 0)):
        raise DomainError("radius must be strictly positive")
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    sin_t = np.sin(theta)
    return np.stack(
        [r * np.sin(phi) * sin_t, r * np.cos(theta), r * np.cos(phi) * sin_t], axis=-1
    )


def cart_to_sph(p: np.ndarray) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """Cartesian ``(..., 3)`` to ``(r, phi, theta)``.

    ``phi`` uses the full-quadrant arctangent of ``(x, z)`` wrapped to
    ``[0, 2pi)``; at the poles it is 0.
    """
    p = np.asarray(p, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r = np.sqrt(x * x + y * y + z * z)
    if np.any(r == 0):
        raise DomainError("cannot convert the origin to spherical coordinates")
    phi = np.mod(np.arctan2(x, z), TWO_PI)
    # arctan2 may return exactly 2pi after the modulo for tiny negative angles
    phi = np.where(phi >= TWO_PI, 0.0, phi)
    # atan2 keeps full precision near the poles where acos(y / r) does not
    theta = np.arctan2(np.hypot(x, z), y)
    if r.ndim == 0:
        return float(r), float(phi), float(theta)
    return r, phi, theta


def haversine_lat(theta1: ArrayLike, theta2: ArrayLike) -> ArrayLike:
    """Signed great-circle distance between two points on the same meridian.

    ``2 * asin(sin((theta2 - theta1) / 2))``; periodic in the difference,
    which clips large errors back into ``[-pi, pi]``.
    """
    d = np.asarray(theta2, dtype=np.float64) - np.asarray(theta1, dtype=np.float64)
    out = 2.0 * np.arcsin(np.clip(np.sin(0.5 * d), -1.0, 1.0))
    return float(out) if out.ndim == 0 else out


def vertical_latitude_shift(theta: ArrayLike, r: ArrayLike, dy: ArrayLike) -> ArrayLike:
    """First-order change of theta for a vertical displacement ``dy`` of the point."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(~(r > 0)):
        raise DomainError("radius must be strictly positive")
    out = -np.sin(np.asarray(theta, dtype=np.float64)) / r * np.asarray(dy, dtype=np.float64)
    return float(out) if out.ndim == 0 else out


def angle_grid(height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    """``(phi, theta)`` arrays of shape ``(H, W)`` at pixel centers."""
    phi = (np.arange(width) + 0.5) * TWO_PI / width
    theta = (np.arange(height) + 0.5) * math.pi / height
    return np.broadcast_to(phi[None, :], (height, width)), np.broadcast_to(theta[:, None], (height, width))


def unit_directions(height: int, width: int) -> np.ndarray:
    """Unit ray directions for every pixel center, shape ``(H, W, 3)``."""
    phi, theta = angle_grid(height, width)
    return sph_to_cart(np.ones((height, width)), phi, theta)


def lift_depth(depth: np.ndarray) -> StructuredPointCloud:
    """Turn a radial depth map into a structured point cloud."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim == 3:
        depth = depth[..., 0]
    h, w = check_grid(depth)
    valid = valid_depth_mask(depth)
    r = np.where(valid, depth, np.nan)
    points = unit_directions(h, w) * r[..., None]
    return StructuredPointCloud(points=points, valid=valid)


def normals_from_depth(depth: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Surface normals from central differences of the lifted cloud.

    The normal is the cross product of the vertical and horizontal central
    differences, flipped to face the camera. Azimuthal differences wrap at
    the seam; the first and last rows have no vertical stencil and are
    invalid, as is every pixel whose stencil touches a hole.

    Returns:
        ``(normals, valid)`` with normals of shape ``(H, W, 3)`` (zero where
        invalid) and a boolean mask of shape ``(H, W)``.
    """
    cloud = lift_depth(depth)
    pts, ok = cloud.points, cloud.valid
    h, w = ok.shape

    du = np.roll(pts, -1, axis=1) - np.roll(pts, 1, axis=1)
    du_ok = np.roll(ok, -1, axis=1) & np.roll(ok, 1, axis=1)

    dv = np.zeros_like(pts)
    dv_ok = np.zeros_like(ok)
    if h >= 3:
        dv[1:-1] = pts[2:] - pts[:-2]
        dv_ok[1:-1] = ok[2:] & ok[:-2]

    valid = ok & du_ok & dv_ok
    n = np.cross(dv, du)
    norm = np.linalg.norm(n, axis=-1)
    valid &= np.isfinite(norm) & (norm > 0)
    safe = np.where(valid, norm, 1.0)
    n = np.where(valid[..., None], n / safe[..., None], 0.0)

    # camera-facing: dot(n, -V) >= 0
    facing = np.einsum("hwc,hwc->hw", n, np.where(valid[..., None], pts, 0.0))
    n = np.where((facing > 0)[..., None], -n, n)
    return n, valid


def spherical_row_weights(height: int) -> np.ndarray:
    """Per-row area weights ``sin(theta)`` at pixel centers."""
    if height < 1:
        raise DomainError("height must be >= 1")
    return np.sin((np.arange(height) + 0.5) * math.pi / height)
