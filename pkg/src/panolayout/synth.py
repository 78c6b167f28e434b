"""Analytic axis-aligned room renderer used as ground truth everywhere."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryVector
from .labeling import CEILING, FLOOR, NOT_LAYOUT, WALL
from .pano_core import TWO_PI, unit_directions

# plane order fixes tie-breaking: x_min, x_max, z_min, z_max, floor, ceiling
_INWARD_NORMALS = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)
_PLANE_LABELS = np.array([WALL, WALL, WALL, WALL, FLOOR, CEILING], dtype=np.uint8)


@dataclass(frozen=True)
class CuboidScene:
    """Room with axis-aligned planes, expressed in the camera frame (meters)."""

    x_min: float = -2.0
    x_max: float = 2.0
    z_min: float = -2.0
    z_max: float = 2.0
    y_floor: float = -1.3
    y_ceil: float = 1.3
    width: int = 512
    height: int = 256

    def __post_init__(self):
        if not (self.x_min < 0 < self.x_max and self.z_min < 0 < self.z_max
                and self.y_floor < 0 < self.y_ceil):
            raise ValueError(f"camera must lie strictly inside the room: {self}")
        if self.width < 2 or self.height < 1:
            raise ValueError(f"invalid resolution {self.width}x{self.height}")

    @classmethod
    def random(cls, rng: np.random.Generator, width: int = 512, height: int = 256,
               symmetric: bool = False, camera_offset: float = 0.0) -> "CuboidScene":
        """Draw a plausible room; ``camera_offset`` raises the camera above mid-height."""
        x_min, z_min = -rng.uniform(1.5, 3.5, size=2)
        x_max, z_max = rng.uniform(1.5, 3.5, size=2)
        half = rng.uniform(1.2, 1.6)
        mid = (0.0 if symmetric else rng.uniform(-0.3, 0.3)) - camera_offset
        return cls(float(x_min), float(x_max), float(z_min), float(z_max),
                   float(mid - half), float(mid + half), width, height)

    def planes(self) -> np.ndarray:
        """Plane offsets in tie-break order."""
        return np.array([self.x_min, self.x_max, self.z_min, self.z_max, self.y_floor, self.y_ceil])

    def horizontal_wall_distance(self, phi: np.ndarray) -> np.ndarray:
        """Horizontal distance to the wall hit along azimuth ``phi``."""
        phi = np.asarray(phi, dtype=np.float64)
        sx, cz = np.sin(phi), np.cos(phi)
        with np.errstate(divide="ignore", invalid="ignore"):
            tx = np.where(sx > 0, self.x_max / sx, np.where(sx < 0, self.x_min / sx, np.inf))
            tz = np.where(cz > 0, self.z_max / cz, np.where(cz < 0, self.z_min / cz, np.inf))
        return np.minimum(tx, tz)

    def top_latitude(self, phi: np.ndarray) -> np.ndarray:
        d = self.horizontal_wall_distance(phi)
        return np.arccos(self.y_ceil / np.hypot(d, self.y_ceil))

    def bottom_latitude(self, phi: np.ndarray) -> np.ndarray:
        d = self.horizontal_wall_distance(phi)
        return np.arccos(self.y_floor / np.hypot(d, self.y_floor))

    def top_radius(self, phi: np.ndarray) -> np.ndarray:
        """Distance from the camera to the ceiling-wall edge along each meridian."""
        return np.hypot(self.horizontal_wall_distance(phi), self.y_ceil)


@dataclass
class SceneRender:
    depth: np.ndarray
    normals: np.ndarray
    labels: np.ndarray
    top: BoundaryVector
    bottom: BoundaryVector


def _meridians(width: int) -> np.ndarray:
    return (np.arange(width) + 0.5) * TWO_PI / width


def render_cuboid(scene: CuboidScene) -> SceneRender:
    """Ray-cast every pixel center against the six room planes."""
    h, w = scene.height, scene.width
    dirs = unit_directions(h, w)
    # axis of each plane in (x, y, z) index terms
    axis = np.array([0, 0, 2, 2, 1, 1])
    offsets = scene.planes()
    comp = dirs[..., axis]  # (H, W, 6)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = offsets / comp
    t = np.where((comp != 0) & (t > 0), t, np.inf)

    best = np.zeros((h, w), dtype=np.intp)
    best_t = t[..., 0].copy()
    for k in range(1, 6):
        closer = t[..., k] < best_t
        best = np.where(closer, k, best)
        best_t = np.where(closer, t[..., k], best_t)

    phi = _meridians(w)
    top = BoundaryVector(scene.top_latitude(phi), np.ones(w, dtype=bool), "top")
    bottom = BoundaryVector(scene.bottom_latitude(phi), np.ones(w, dtype=bool), "bottom")
    return SceneRender(
        depth=best_t,
        normals=_INWARD_NORMALS[best],
        labels=_PLANE_LABELS[best],
        top=top,
        bottom=bottom,
    )


def perturb_labels(labels, hole_fraction: float, seed: int) -> np.ndarray:
    """Stamp seeded rectangles of the not-layout class onto a label map.

    ``labels`` is a label grid or a :class:`SceneRender`.

    Rectangles are added until roughly ``hole_fraction`` of the pixels are
    covered. Pixels outside the rectangles are left untouched.
    """
    if not 0.0 <= hole_fraction <= 0.5:
        raise ValueError(f"hole_fraction must be in [0, 0.5], got {hole_fraction}")
    if isinstance(labels, SceneRender):
        labels = labels.labels
    out = np.array(labels, copy=True)
    if hole_fraction == 0:
        return out
    h, w = out.shape
    rng = np.random.Generator(np.random.Philox(seed))
    covered = np.zeros((h, w), dtype=bool)
    target = hole_fraction * h * w
    max_side_v = max(1, h // 6)
    max_side_u = max(1, w // 12)
    while covered.sum() < target:
        rh = int(rng.integers(1, max_side_v + 1))
        rw = int(rng.integers(1, max_side_u + 1))
        v0 = int(rng.integers(0, h - rh + 1))
        u0 = int(rng.integers(0, w))
        cols = np.arange(u0, u0 + rw) % w
        covered[v0:v0 + rh, cols] = True
    out[covered] = NOT_LAYOUT
    return out


def oracle_plane_distance(scene: CuboidScene, points: np.ndarray) -> np.ndarray:
    """Smallest distance from each point to any of the room's six planes."""
    offsets = scene.planes()
    coords = points[..., [0, 0, 2, 2, 1, 1]]
    return np.min(np.abs(coords - offsets), axis=-1)


__all__ = [
    "CuboidScene",
    "SceneRender",
    "render_cuboid",
    "perturb_labels",
    "oracle_plane_distance",
]
