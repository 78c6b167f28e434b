"""Per-meridian layout boundaries: extraction from class maps and denoising."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from .pano_core import DomainError

logger = logging.getLogger(__name__)

_CEILING, _FLOOR = 0, 2


@dataclass
class BoundaryVector:
    """Boundary latitudes (radians) for every meridian plus validity flags.

    ``kind`` is ``"top"`` (ceiling-wall) or ``"bottom"`` (wall-floor).
    ``diagnostics`` collects notes from processing steps that chose not to act.
    """

    latitudes: np.ndarray
    valid: np.ndarray
    kind: str = "top"
    diagnostics: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        self.latitudes = np.asarray(self.latitudes, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.latitudes.ndim != 1 or self.latitudes.shape != self.valid.shape:
            raise DomainError(
                f"latitudes {self.latitudes.shape} and valid {self.valid.shape} must be equal 1-D shapes"
            )
        if self.kind not in ("top", "bottom"):
            raise DomainError(f"kind must be 'top' or 'bottom', got {self.kind!r}")

    @property
    def width(self) -> int:
        return self.latitudes.size

    def roll(self, offset: int) -> "BoundaryVector":
        return replace(self, latitudes=np.roll(self.latitudes, offset), valid=np.roll(self.valid, offset))

    def flip(self) -> "BoundaryVector":
        return replace(self, latitudes=self.latitudes[::-1].copy(), valid=self.valid[::-1].copy())


def greedy_vertical_edges(layout: np.ndarray) -> Tuple[BoundaryVector, BoundaryVector]:
    """First ceiling edge scanning down and first floor edge scanning up.

    The latitude is taken at the border between the two pixel rows. Columns
    without such an edge, or whose edge lies on the wrong side of the
    equator, are flagged invalid.
    """
    layout = np.asarray(layout)
    h, w = layout.shape
    row_step = math.pi / h

    ceil = layout == _CEILING
    # top: first v with ceiling at v and non-ceiling at v + 1
    top_edge = ceil[:-1] & ~ceil[1:]
    has_top = top_edge.any(axis=0)
    v_top = np.argmax(top_edge, axis=0)
    top_lat = (v_top + 1) * row_step

    floor = layout == _FLOOR
    # bottom: scanning upward, first v with floor at v and non-floor at v - 1
    bot_edge = floor[1:] & ~floor[:-1]  # index i means rows i (non-floor) / i + 1 (floor)
    has_bot = bot_edge.any(axis=0)
    last = h - 2 - np.argmax(bot_edge[::-1], axis=0)
    bot_lat = (last + 1) * row_step

    top_valid = has_top & (top_lat < math.pi / 2)
    bot_valid = has_bot & (bot_lat > math.pi / 2)
    top = BoundaryVector(np.where(top_valid, top_lat, np.nan), top_valid, "top")
    bottom = BoundaryVector(np.where(bot_valid, bot_lat, np.nan), bot_valid, "bottom")
    return top, bottom


def median_filter_boundary(b: BoundaryVector, window: int = 5, fill_invalid: bool = False) -> BoundaryVector:
    """Circular median over the valid meridians of each window.

    Invalid meridians stay invalid unless ``fill_invalid`` is set, in which
    case they take the median of their valid neighbors when there are any.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"median window must be odd and >= 1, got {window}")
    if window == 1:
        return replace(b, latitudes=b.latitudes.copy(), valid=b.valid.copy())
    half = window // 2
    offsets = np.arange(-half, half + 1)
    idx = (np.arange(b.width)[:, None] + offsets[None, :]) % b.width
    vals = np.where(b.valid[idx], b.latitudes[idx], np.nan)
    has_any = b.valid[idx].any(axis=1)
    med = np.full(b.width, np.nan)
    med[has_any] = np.nanmedian(vals[has_any], axis=1)

    valid = has_any if fill_invalid else (b.valid & has_any)
    return replace(b, latitudes=np.where(valid, med, np.nan), valid=valid)


def mad_reject(b: BoundaryVector, z_threshold: float = 3.5, min_valid: int = 8) -> BoundaryVector:
    """Invalidate meridians whose modified z-score exceeds ``z_threshold``.

    The modified z-score is ``0.6745 * |x - median| / MAD``. With MAD equal to
    zero nothing is rejected. Fewer than ``min_valid`` valid meridians leaves
    the vector untouched and records a diagnostic.
    """
    n_valid = int(b.valid.sum())
    if n_valid < min_valid:
        note = f"mad_reject skipped: {n_valid} valid meridians < {min_valid}"
        logger.warning(note)
        return replace(b, latitudes=b.latitudes.copy(), valid=b.valid.copy(),
                       diagnostics=b.diagnostics + (note,))
    x = b.latitudes[b.valid]
    med = np.median(x)
    mad = np.median(np.abs(x - med))
    if mad == 0:
        return replace(b, latitudes=b.latitudes.copy(), valid=b.valid.copy())
    with np.errstate(invalid="ignore"):
        score = 0.6745 * np.abs(b.latitudes - med) / mad
    keep = b.valid & (score <= z_threshold)
    return replace(b, latitudes=np.where(keep, b.latitudes, np.nan), valid=keep)


def to_normalized(b: BoundaryVector) -> np.ndarray:
    """Top boundary latitudes as normalized heights: 1 at the zenith, 0 on the horizon."""
    if b.kind != "top":
        raise DomainError("normalized heights are defined for top boundaries only")
    if np.any(b.latitudes[b.valid] > math.pi / 2):
        raise DomainError("top boundary latitude below the horizon")
    return 1.0 - b.latitudes / (math.pi / 2)


def from_normalized(heights: np.ndarray, valid: np.ndarray | None = None) -> BoundaryVector:
    heights = np.asarray(heights, dtype=np.float64)
    if valid is None:
        valid = np.isfinite(heights)
    chk = heights[valid]
    if np.any((chk < 0) | (chk > 1)):
        raise DomainError("normalized heights must lie in [0, 1]")
    return BoundaryVector(0.5 * math.pi * (1.0 - heights), valid, "top")
