"""Bottom boundary reconstruction from the top boundary and a depth map.

Two estimators are provided. ``reconstruct_bottom`` follows the midpoint
translation chain: move the top edge point into the frame of a camera at the
room's mid-height, mirror its latitude about the equator there, and carry the
latitude displacement of the top edge over to the bottom edge. It is exact for
a camera at mid-height and first-order accurate otherwise.
``reconstruct_bottom_exact`` drops the top edge point vertically onto the
floor plane, which is exact for vertical walls.

Sign conventions: ``y_d`` is the vertical translation that maps camera-frame
points into the mid-height frame, ``y_mid_frame = y + y_d``, so
``y_d = -(y_ceil + y_floor) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .boundary import BoundaryVector
from .pano_core import DomainError, lift_depth, valid_depth_mask


class UnreconstructableError(ValueError):
    """Pole rows hold no usable depth; the scene's layout cannot be completed."""

    valid = False


@dataclass(frozen=True)
class ReconParams:
    k: int = 3
    w: int = 3

    def __post_init__(self):
        if self.k < 1 or self.w < 1 or self.w % 2 == 0:
            raise ValueError(f"need k >= 1 and odd w >= 1, got k={self.k}, w={self.w}")


@dataclass(frozen=True)
class PlaneHeights:
    y_ceil_mean: float
    y_floor_mean: float

    @property
    def h(self) -> float:
        return self.y_ceil_mean - self.y_floor_mean

    @property
    def y_mid(self) -> float:
        return 0.5 * (self.y_ceil_mean + self.y_floor_mean)

    @property
    def y_d(self) -> float:
        return -self.y_mid


def _exact_mean(values: np.ndarray) -> float:
    # fsum is order independent, keeping results invariant to column shifts
    return math.fsum(values.tolist()) / values.size


def estimate_plane_heights(depth: np.ndarray, params: ReconParams = ReconParams()) -> PlaneHeights:
    """Mean ceiling and floor heights from the top and bottom ``k`` rows."""
    cloud = lift_depth(depth)
    h = cloud.valid.shape[0]
    k = params.k
    if 2 * k > h:
        raise DomainError(f"k={k} pole rows exceed half the height {h}")
    top_ok = cloud.valid[:k]
    bot_ok = cloud.valid[h - k:]
    if not top_ok.any() or not bot_ok.any():
        raise UnreconstructableError("no valid depth in the zenith or nadir rows")
    y_top = _exact_mean(cloud.points[:k, :, 1][top_ok])
    y_bot = _exact_mean(cloud.points[h - k:, :, 1][bot_ok])
    if not y_bot < 0 < y_top:
        raise UnreconstructableError(
            f"pole heights ceil={y_top:.4f}, floor={y_bot:.4f} do not bracket the camera"
        )
    return PlaneHeights(y_top, y_bot)


def boundary_rows(latitudes: np.ndarray, height: int) -> np.ndarray:
    """Nearest pixel row to each latitude, halfway cases rounding down the image."""
    v = np.asarray(latitudes) * height / math.pi - 0.5
    return np.clip(np.floor(v + 0.5), 0, height - 1).astype(np.intp)


def sample_depth_at_boundary(depth: np.ndarray, top: BoundaryVector, w: int = 3) -> Tuple[np.ndarray, np.ndarray]:
    """Mean valid depth in a ``w``-row window around the boundary row of each meridian.

    Returns:
        ``(radii, valid)``; radii are NaN where invalid.
    """
    if w < 1 or w % 2 == 0:
        raise ValueError(f"window must be odd, got {w}")
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim == 3:
        depth = depth[..., 0]
    h, width = depth.shape
    if top.width != width:
        raise DomainError(f"boundary width {top.width} != depth width {width}")
    ok = valid_depth_mask(depth)
    lat = np.where(top.valid, top.latitudes, math.pi / 2)
    centre = boundary_rows(lat, h)
    rows = centre[None, :] + np.arange(-(w // 2), w // 2 + 1)[:, None]
    inside = (rows >= 0) & (rows < h)
    rows = np.clip(rows, 0, h - 1)
    cols = np.broadcast_to(np.arange(width)[None, :], rows.shape)
    use = ok[rows, cols] & inside
    vals = np.where(use, depth[rows, cols], 0.0)
    count = use.sum(axis=0)
    valid = top.valid & (count > 0)
    radii = np.where(valid, vals.sum(axis=0) / np.maximum(count, 1), np.nan)
    return radii, valid


def _lift_top(top: BoundaryVector, radii: np.ndarray):
    """Horizontal range and height of each top edge point.

    Both estimators only need these two, so results do not depend on the
    meridian's azimuth and commute exactly with circular shifts.
    """
    ok = top.valid & np.isfinite(radii) & (radii > 0)
    theta = np.where(ok, top.latitudes, math.pi / 4)
    r = np.where(ok, radii, 1.0)
    return r * np.sin(theta), r * np.cos(theta), theta, ok


def _finish(lat: np.ndarray, ok: np.ndarray) -> BoundaryVector:
    ok = ok & np.isfinite(lat) & (lat > math.pi / 2) & (lat <= math.pi)
    return BoundaryVector(np.where(ok, lat, np.nan), ok, "bottom")


def reconstruct_bottom(top: BoundaryVector, radii: np.ndarray, heights: PlaneHeights) -> BoundaryVector:
    """Bottom boundary via the mid-height translation chain.

    Per meridian the top edge point is translated by ``y_d`` and its latitude
    ``theta_t_mid`` recomputed. At mid-height the bottom edge mirrors it
    (``pi - theta_t_mid``), and a vertical camera move displaces top and
    bottom latitudes equally to first order, so the bottom latitude seen from
    the actual camera is ``pi - theta_t_mid + (theta_t - theta_t_mid)``.
    """
    rho, y, theta_t, ok = _lift_top(top, np.asarray(radii, dtype=np.float64))
    y_mid = y + heights.y_d
    r_mid = np.hypot(rho, y_mid)
    ok &= r_mid > 0
    theta_t_mid = np.arccos(np.clip(y_mid / np.where(ok, r_mid, 1.0), -1.0, 1.0))
    theta_b_mid = math.pi - theta_t_mid
    gamma = theta_t - theta_t_mid
    return _finish(theta_b_mid + gamma, ok)


def reconstruct_bottom_exact(top: BoundaryVector, radii: np.ndarray, heights: PlaneHeights) -> BoundaryVector:
    """Bottom boundary by dropping each top edge point onto the floor plane."""
    rho, _, _, ok = _lift_top(top, np.asarray(radii, dtype=np.float64))
    yb = heights.y_floor_mean
    rb = np.hypot(rho, yb)
    ok &= rb > 0
    lat = np.arccos(np.clip(yb / np.where(ok, rb, 1.0), -1.0, 1.0))
    return _finish(lat, ok)


def layout_validity(
    top: BoundaryVector,
    radii_valid: np.ndarray | None,
    heights_ok: bool,
    min_fraction: float = 0.25,
) -> Tuple[np.ndarray, bool]:
    """Per-meridian layout validity mask and a scene-level verdict."""
    if not heights_ok or radii_valid is None:
        return np.zeros(top.width, dtype=bool), False
    mask = top.valid & np.asarray(radii_valid, dtype=bool)
    return mask, bool(mask.mean() >= min_fraction)


def complete_bottom(
    top: BoundaryVector,
    depth: np.ndarray,
    params: ReconParams = ReconParams(),
    exact: bool = False,
    min_fraction: float = 0.25,
) -> Tuple[BoundaryVector, np.ndarray, bool]:
    """Heights, boundary sampling and reconstruction in one call.

    Returns ``(bottom, layout_mask, scene_valid)``; an unreconstructable
    scene yields an all-invalid bottom boundary instead of raising.
    """
    try:
        heights = estimate_plane_heights(depth, params)
    except UnreconstructableError:
        mask, flag = layout_validity(top, None, False, min_fraction)
        empty = BoundaryVector(np.full(top.width, np.nan), mask, "bottom")
        return empty, mask, flag
    radii, radii_ok = sample_depth_at_boundary(depth, top, params.w)
    recon = reconstruct_bottom_exact if exact else reconstruct_bottom
    bottom = recon(top, radii, heights)
    mask, flag = layout_validity(top, radii_ok, True, min_fraction)
    mask &= bottom.valid
    return bottom, mask, bool(flag and mask.mean() >= min_fraction)
