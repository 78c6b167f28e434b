"""Weak layout cue extraction: semantic labels + normals + depth -> boundaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .boundary import BoundaryVector, greedy_vertical_edges, mad_reject, median_filter_boundary
from .config import PipelineConfig
from .labeling import build_unary, crf_refine, map_to_layout_classes
from .layout_recon import PlaneHeights, UnreconstructableError, complete_bottom, estimate_plane_heights
from .pano_core import normals_from_depth


@dataclass
class LayoutCues:
    layout: np.ndarray
    refined: np.ndarray
    top_raw: BoundaryVector
    bottom_raw: BoundaryVector
    top_median: BoundaryVector
    top: BoundaryVector
    bottom: BoundaryVector
    layout_mask: np.ndarray
    scene_valid: bool
    heights: Optional[PlaneHeights]


def extract_cues(
    labels: np.ndarray,
    depth: np.ndarray,
    normals: Optional[np.ndarray] = None,
    config: PipelineConfig = PipelineConfig(),
) -> LayoutCues:
    """Run mapping, CRF, greedy edges, median + MAD filtering and bottom completion.

    Without ``normals`` they are derived from ``depth``.
    """
    if normals is None:
        normals, _ = normals_from_depth(depth)
    layout = map_to_layout_classes(labels, config.label_mapping())
    unary = build_unary(layout, config.unary.confidence)
    refined = crf_refine(unary, normals, config.crf)

    top_raw, bottom_raw = greedy_vertical_edges(refined)
    top_med = median_filter_boundary(top_raw, config.boundary.median_window)
    top = mad_reject(top_med, config.boundary.mad_threshold, config.boundary.mad_min_valid)

    bottom, mask, scene_ok = complete_bottom(
        top, depth, config.recon.params(), exact=config.recon.exact,
        min_fraction=config.recon.min_valid_fraction,
    )
    try:
        heights = estimate_plane_heights(depth, config.recon.params())
    except UnreconstructableError:
        heights = None
    return LayoutCues(layout, refined, top_raw, bottom_raw, top_med, top, bottom, mask, scene_ok, heights)
