"""Panorama augmentations applied consistently across modalities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .boundary import BoundaryVector


@dataclass
class Sample:
    """One panorama with any subset of its modalities.

    Grids share ``(H, W)``; ``masks`` holds extra per-pixel masks that move
    with the geometry (e.g. depth validity).
    """

    color: Optional[np.ndarray] = None
    depth: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    top: Optional[BoundaryVector] = None
    bottom: Optional[BoundaryVector] = None
    masks: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        shapes = {g.shape[:2] for g in self._grids().values()}
        if len(shapes) > 1:
            raise ValueError(f"sample grids disagree in size: {sorted(shapes)}")
        width = next(iter(shapes))[1] if shapes else None
        for b in (self.top, self.bottom):
            if b is not None and width is not None and b.width != width:
                raise ValueError(f"boundary of width {b.width} for grids of width {width}")

    def _grids(self) -> Dict[str, np.ndarray]:
        grids = {k: getattr(self, k) for k in ("color", "depth", "normals", "labels")}
        grids = {k: v for k, v in grids.items() if v is not None}
        grids.update({f"mask:{k}": v for k, v in self.masks.items()})
        return grids

    @property
    def width(self) -> Optional[int]:
        for g in self._grids().values():
            return g.shape[1]
        for b in (self.top, self.bottom):
            if b is not None:
                return b.width
        return None


def _map_grids(s: Sample, fn) -> Dict[str, object]:
    out: Dict[str, object] = {}
    for k in ("color", "depth", "normals", "labels"):
        v = getattr(s, k)
        out[k] = None if v is None else fn(v)
    out["masks"] = {k: fn(v) for k, v in s.masks.items()}
    return out


def rotate_normals_y(normals: np.ndarray, angle: float) -> np.ndarray:
    """Rotate vectors about the vertical axis so that azimuth grows by ``angle``."""
    c, s = math.cos(angle), math.sin(angle)
    x, y, z = normals[..., 0], normals[..., 1], normals[..., 2]
    return np.stack([c * x + s * z, y, -s * x + c * z], axis=-1)


def circular_shift(s: Sample, offset: int) -> Sample:
    """Roll every modality ``offset`` columns to the right, wrapping at the seam."""
    width = s.width
    if width is None:
        return replace(s)
    offset = int(offset) % width
    fields = _map_grids(s, lambda g: np.roll(g, offset, axis=1))
    if fields["normals"] is not None and offset:
        fields["normals"] = rotate_normals_y(fields["normals"], 2.0 * math.pi * offset / width)
    return replace(
        s, **fields,
        top=None if s.top is None else s.top.roll(offset),
        bottom=None if s.bottom is None else s.bottom.roll(offset),
    )


def horizontal_flip(s: Sample) -> Sample:
    """Mirror columns ``u -> W - 1 - u``; normals mirror their x component."""
    fields = _map_grids(s, lambda g: g[:, ::-1].copy())
    if fields["normals"] is not None:
        n = fields["normals"].astype(np.float64, copy=True)
        n[..., 0] = -n[..., 0]
        fields["normals"] = n
    return replace(
        s, **fields,
        top=None if s.top is None else s.top.flip(),
        bottom=None if s.bottom is None else s.bottom.flip(),
    )


def photometric(s: Sample, gamma: float = 1.0, brightness: float = 0.0, contrast: float = 1.0) -> Sample:
    """Gamma, contrast and brightness on the color image only (values in [0, 255])."""
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if s.color is None:
        return replace(s)
    c = np.asarray(s.color, dtype=np.float64) / 255.0
    out = np.clip(np.power(c, gamma) * contrast + brightness, 0.0, 1.0) * 255.0
    return replace(s, color=out)


def random_erase(s: Sample, count: int, size_range: Tuple[int, int], seed: int) -> Sample:
    """Replace ``count`` seeded rectangles of the color image with its mean color.

    Rectangle sides are drawn uniformly from ``size_range`` (inclusive) and
    wrap horizontally across the seam.
    """
    if s.color is None or count == 0:
        return replace(s)
    color = np.asarray(s.color, dtype=np.float64)
    h, w = color.shape[:2]
    lo, hi = size_range
    if not (1 <= lo <= hi <= min(h, w)):
        raise ValueError(f"erase size range {size_range} does not fit a {w}x{h} image")
    mean = color.reshape(h * w, -1).mean(axis=0)
    out = color.copy()
    rng = np.random.Generator(np.random.Philox(seed))
    for _ in range(count):
        rh, rw = (int(x) for x in rng.integers(lo, hi + 1, size=2))
        v0 = int(rng.integers(0, h - rh + 1))
        u0 = int(rng.integers(0, w))
        cols = np.arange(u0, u0 + rw) % w
        out[v0:v0 + rh, cols] = mean if color.ndim == 3 else mean[0]
    return replace(s, color=out)


@dataclass(frozen=True)
class AugmentPolicy:
    """Application probabilities and parameter ranges for :func:`random_augment`."""

    p_shift: float = 0.75
    p_flip: float = 0.5
    p_photometric: float = 0.8
    p_erase: float = 0.5
    gamma_range: Tuple[float, float] = (0.8, 1.2)
    brightness_range: Tuple[float, float] = (-0.1, 0.1)
    contrast_range: Tuple[float, float] = (0.8, 1.2)
    erase_count: Tuple[int, int] = (1, 3)
    erase_size_fraction: Tuple[float, float] = (0.05, 0.2)


def random_augment(s: Sample, seed: int, policy: AugmentPolicy = AugmentPolicy()) -> Tuple[Sample, Dict[str, object]]:
    """Seeded draw of the augmentations; returns the sample and the parameters used."""
    rng = np.random.Generator(np.random.Philox(seed))
    applied: Dict[str, object] = {}
    width = s.width or 1
    if rng.random() < policy.p_shift:
        offset = int(rng.integers(0, width))
        s = circular_shift(s, offset)
        applied["shift"] = offset
    if rng.random() < policy.p_flip:
        s = horizontal_flip(s)
        applied["flip"] = True
    if rng.random() < policy.p_photometric:
        params = dict(
            gamma=float(rng.uniform(*policy.gamma_range)),
            brightness=float(rng.uniform(*policy.brightness_range)),
            contrast=float(rng.uniform(*policy.contrast_range)),
        )
        s = photometric(s, **params)
        applied["photometric"] = params
    if rng.random() < policy.p_erase and s.color is not None:
        h, w = s.color.shape[:2]
        side = min(h, w)
        lo = max(1, int(policy.erase_size_fraction[0] * side))
        hi = max(lo, int(policy.erase_size_fraction[1] * side))
        count = int(rng.integers(policy.erase_count[0], policy.erase_count[1] + 1))
        erase_seed = int(rng.integers(0, 2 ** 31))
        s = random_erase(s, count, (lo, hi), erase_seed)
        applied["erase"] = {"count": count, "size_range": [lo, hi], "seed": erase_seed}
    return s, applied
