"""Depth and layout metrics, training losses and the lighting-bias diagnostic."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .boundary import BoundaryVector
from .pano_core import DomainError, haversine_lat, lift_depth, normals_from_depth, spherical_row_weights

logger = logging.getLogger(__name__)

REPORT_KEYS = (
    "abs_rel", "sq_rel", "rmse", "rmsle", "delta1", "delta2", "delta3",
    "i_d", "rmse_top", "rmse_bottom", "i_l", "pcc",
)


class EmptyMaskError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmsle: float
    delta1: float
    delta2: float
    delta3: float
    n_valid: int


@dataclass(frozen=True)
class LossWeights:
    lambda_l1: Tuple[float, float, float] = (0.15, 0.1, 0.05)
    lambda_v: Tuple[float, float, float] = (0.1, 0.1, 0.05)
    lambda_s: Tuple[float, float, float] = (0.1, 0.1, 0.05)
    lambda_layout: float = 0.05

    def __post_init__(self):
        for name in ("lambda_l1", "lambda_v", "lambda_s"):
            vals = getattr(self, name)
            if len(vals) != 3 or min(vals) < 0:
                raise ValueError(f"{name} needs three non-negative values, got {vals}")
        if self.lambda_layout < 0:
            raise ValueError("lambda_layout must be non-negative")

    def scaled(self, factor: float) -> "LossWeights":
        return LossWeights(
            tuple(factor * v for v in self.lambda_l1),
            tuple(factor * v for v in self.lambda_v),
            tuple(factor * v for v in self.lambda_s),
            factor * self.lambda_layout,
        )


def _depth_mask(pred: np.ndarray, gt: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    if pred.shape != gt.shape:
        raise DomainError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    with np.errstate(invalid="ignore"):
        m = np.isfinite(pred) & np.isfinite(gt) & (gt > 0) & (pred > 0)
    if mask is not None:
        m &= np.asarray(mask, dtype=bool)
    return m


def _as_depth(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[..., 0] if x.ndim == 3 else x


def depth_metrics(pred: np.ndarray, gt: np.ndarray, mask: Optional[np.ndarray] = None) -> MetricsReport:
    """Standard depth metrics without median scaling; deltas in percent with strict ``<``."""
    pred, gt = _as_depth(pred), _as_depth(gt)
    m = _depth_mask(pred, gt, mask)
    n = int(m.sum())
    if n == 0:
        raise EmptyMaskError("no valid pixels to evaluate")
    p, g = pred[m], gt[m]
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    return MetricsReport(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff ** 2 / g)),
        rmse=float(np.sqrt(np.mean(diff ** 2))),
        rmsle=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(100.0 * np.mean(ratio < 1.25)),
        delta2=float(100.0 * np.mean(ratio < 1.25 ** 2)),
        delta3=float(100.0 * np.mean(ratio < 1.25 ** 3)),
        n_valid=n,
    )


def _lat(b) -> np.ndarray:
    return b.latitudes if isinstance(b, BoundaryVector) else np.asarray(b, dtype=np.float64)


def _valid(b) -> np.ndarray:
    if isinstance(b, BoundaryVector):
        return b.valid
    return np.isfinite(np.asarray(b, dtype=np.float64))


def layout_rmse(pred, gt, validity: Optional[np.ndarray] = None) -> float:
    """Latitude RMSE (radians) over jointly valid meridians."""
    p, g = _lat(pred), _lat(gt)
    if p.shape != g.shape:
        raise DomainError(f"boundary lengths differ: {p.shape} vs {g.shape}")
    m = _valid(pred) & _valid(gt)
    if validity is not None:
        m &= np.asarray(validity, dtype=bool)
    if not m.any():
        raise EmptyMaskError("no jointly valid meridians")
    return float(np.sqrt(np.mean((p[m] - g[m]) ** 2)))


def indicators(report: MetricsReport | Mapping[str, float], rmse_top: float, rmse_bottom: float) -> Tuple[float, float]:
    """Depth indicator ``(1 - delta1/100) * RMSE`` and layout indicator ``top * bottom * 1000``."""
    if isinstance(report, MetricsReport):
        delta1, rmse = report.delta1, report.rmse
    else:
        delta1, rmse = report["delta1"], report["rmse"]
    i_d = (1.0 - delta1 / 100.0) * rmse
    i_l = rmse_top * rmse_bottom * 1000.0
    return float(i_d), float(i_l)


def _masked_mean(x: np.ndarray, m: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    w = m.astype(np.float64)
    if weights is not None:
        w = w * weights
    total = w.sum()
    if total == 0:
        return 0.0
    return float(np.sum(np.where(m, x, 0.0) * w) / total)


def haversine_layout_loss(
    pred_top, gt_top, pred_bottom, gt_bottom,
    top_mask: Optional[np.ndarray] = None,
    bottom_mask: Optional[np.ndarray] = None,
    signed: bool = False,
) -> float:
    """Masked mean haversine error of the top plus that of the bottom boundary.

    Absolute values are used unless ``signed``; a fully masked boundary
    contributes zero.
    """
    total = 0.0
    for pred, gt, mask in ((pred_top, gt_top, top_mask), (pred_bottom, gt_bottom, bottom_mask)):
        p, g = _lat(pred), _lat(gt)
        if p.shape != g.shape:
            raise DomainError(f"boundary lengths differ: {p.shape} vs {g.shape}")
        m = _valid(pred) & _valid(gt) if mask is None else np.asarray(mask, dtype=bool)
        m = m & np.isfinite(p) & np.isfinite(g)
        h = haversine_lat(np.where(m, p, 0.0), np.where(m, g, 0.0))
        total += _masked_mean(h if signed else np.abs(h), m)
    return total


def log_l1_loss(pred, gt, mask: Optional[np.ndarray] = None, alpha: float = 0.5,
                weights: Optional[np.ndarray] = None) -> float:
    """Masked mean of ``log(|pred - gt| + alpha)``; floors at ``log(alpha)``."""
    pred, gt = _as_depth(pred), _as_depth(gt)
    m = np.ones(gt.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if np.any(~(pred[m] > 0)) or np.any(~(gt[m] > 0)):
        raise DomainError("log-L1 loss needs positive depths on the mask")
    err = np.log(np.abs(pred - gt) + alpha)
    return _masked_mean(np.where(m, err, 0.0), m, _row_weights_like(weights, gt.shape))


def _row_weights_like(weights: Optional[np.ndarray], shape) -> Optional[np.ndarray]:
    if weights is None:
        return None
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim == 1:
        return np.broadcast_to(weights[:, None], shape)
    return weights


@dataclass
class VirtualNormalConfig:
    sample_ratio: float = 0.15
    min_angle_deg: float = 15.0
    max_angle_deg: float = 165.0
    min_side: float = 0.05


def _triangle_ok(a: np.ndarray, b: np.ndarray, c: np.ndarray, cfg: VirtualNormalConfig) -> np.ndarray:
    ab, bc, ca = b - a, c - b, a - c
    lab, lbc, lca = (np.linalg.norm(v, axis=-1) for v in (ab, bc, ca))
    ok = (lab >= cfg.min_side) & (lbc >= cfg.min_side) & (lca >= cfg.min_side)
    lo, hi = math.radians(cfg.min_angle_deg), math.radians(cfg.max_angle_deg)
    with np.errstate(invalid="ignore", divide="ignore"):
        for u, v, lu, lv in ((ab, -ca, lab, lca), (bc, -ab, lbc, lab), (ca, -bc, lca, lbc)):
            cos = np.einsum("nc,nc->n", u, v) / (lu * lv)
            ang = np.arccos(np.clip(cos, -1.0, 1.0))
            ok &= (ang >= lo) & (ang <= hi)
    return ok


def _plane_normals(a, b, c) -> Tuple[np.ndarray, np.ndarray]:
    n = np.cross(b - a, c - a)
    length = np.linalg.norm(n, axis=-1)
    ok = length > 0
    return n / np.where(ok, length, 1.0)[:, None], ok


def virtual_normal_loss(pred, gt, mask: Optional[np.ndarray] = None, sample_ratio: float = 0.15,
                        seed: int = 0, config: Optional[VirtualNormalConfig] = None) -> float:
    """Mean L1 distance between unit normals of random point triplets.

    Triplets are drawn with a counter-based generator from pixels valid in
    both maps, and filtered on the ground-truth cloud for short sides and
    near-degenerate angles. Returns 0 (and logs) when nothing survives.
    """
    cfg = config or VirtualNormalConfig(sample_ratio=sample_ratio)
    pred, gt = _as_depth(pred), _as_depth(gt)
    m = _depth_mask(pred, gt, mask)
    idx = np.flatnonzero(m)
    if idx.size < 3:
        raise EmptyMaskError("virtual normal loss needs at least 3 valid pixels")
    rng = np.random.Generator(np.random.Philox(seed))
    n = max(1, int(cfg.sample_ratio * idx.size))
    pick = idx[rng.integers(0, idx.size, size=(n, 3))]
    pg = lift_depth(gt).points.reshape(-1, 3)[pick]
    pp = lift_depth(pred).points.reshape(-1, 3)[pick]
    ok = _triangle_ok(pg[:, 0], pg[:, 1], pg[:, 2], cfg)
    ng, okg = _plane_normals(pg[:, 0], pg[:, 1], pg[:, 2])
    npred, okp = _plane_normals(pp[:, 0], pp[:, 1], pp[:, 2])
    ok &= okg & okp
    if not ok.any():
        logger.warning("virtual normal loss: no triplet survived filtering, returning 0")
        return 0.0
    return float(np.mean(np.abs(npred[ok] - ng[ok]).sum(axis=-1)))


def surface_loss(pred, gt, mask: Optional[np.ndarray] = None, weights: Optional[np.ndarray] = None) -> float:
    """Masked mean cosine distance between normals derived from both depth maps."""
    pred, gt = _as_depth(pred), _as_depth(gt)
    n_p, ok_p = normals_from_depth(pred)
    n_g, ok_g = normals_from_depth(gt)
    m = ok_p & ok_g
    if mask is not None:
        m &= np.asarray(mask, dtype=bool)
    if not m.any():
        raise EmptyMaskError("no pixel with valid normals in both maps")
    cos_dist = 1.0 - np.einsum("hwc,hwc->hw", n_p, n_g)
    return _masked_mean(cos_dist, m, _row_weights_like(weights, gt.shape))


@dataclass
class LossBreakdown:
    total: float
    log_l1: list = field(default_factory=list)
    virtual_normal: list = field(default_factory=list)
    surface: list = field(default_factory=list)
    layout: float = 0.0

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


def total_loss(
    preds: Sequence[np.ndarray],
    gts: Sequence[np.ndarray],
    masks: Sequence[Optional[np.ndarray]],
    boundaries: Optional[Mapping[str, object]] = None,
    weights: LossWeights = LossWeights(),
    seed: int = 0,
    alpha: float = 0.5,
    sample_ratio: float = 0.15,
) -> LossBreakdown:
    """Multi-scale depth loss plus the weighted layout loss.

    ``preds``/``gts``/``masks`` hold one map per scale, coarse to fine.
    ``boundaries`` maps ``pred_top``, ``gt_top``, ``pred_bottom``,
    ``gt_bottom`` and optionally ``top_mask``/``bottom_mask``. Per-pixel
    terms are averaged with spherical row weights of their own scale.
    """
    if not (len(preds) == len(gts) == len(masks) == 3):
        raise ValueError("expected three scales of predictions, targets and masks")
    out = LossBreakdown(total=0.0)
    total = 0.0
    for s, (p, g, m) in enumerate(zip(preds, gts, masks)):
        p, g = _as_depth(p), _as_depth(g)
        valid = _depth_mask(p, g, m)
        rw = spherical_row_weights(g.shape[0])
        l_log = log_l1_loss(p, g, valid, alpha=alpha, weights=rw)
        l_v = virtual_normal_loss(p, g, valid, sample_ratio=sample_ratio, seed=seed + s)
        l_s = surface_loss(p, g, valid, weights=rw)
        out.log_l1.append(l_log)
        out.virtual_normal.append(l_v)
        out.surface.append(l_s)
        total += weights.lambda_l1[s] * l_log + weights.lambda_v[s] * l_v + weights.lambda_s[s] * l_s
    if boundaries is not None:
        out.layout = haversine_layout_loss(
            boundaries["pred_top"], boundaries["gt_top"],
            boundaries["pred_bottom"], boundaries["gt_bottom"],
            boundaries.get("top_mask"), boundaries.get("bottom_mask"),
        )
        total += weights.lambda_layout * out.layout
    out.total = float(total)
    return out


def srgb_to_lightness(color: np.ndarray) -> np.ndarray:
    """CIE L* (D65) from sRGB values in ``[0, 255]``."""
    c = np.asarray(color, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    y = lin @ np.array([0.2126, 0.7152, 0.0722])
    eps = (6.0 / 29.0) ** 3
    f = np.where(y > eps, np.cbrt(y), y / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    return 116.0 * f - 16.0


class UndefinedCorrelationError(ValueError):
    pass


def luminance_invdepth_pcc(color: np.ndarray, depth: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Pearson correlation between L* lightness and inverse depth."""
    depth = _as_depth(depth)
    if color.shape[:2] != depth.shape:
        raise DomainError(f"color {color.shape[:2]} and depth {depth.shape} differ in size")
    with np.errstate(invalid="ignore"):
        m = np.isfinite(depth) & (depth > 0)
    if mask is not None:
        m &= np.asarray(mask, dtype=bool)
    if m.sum() < 2:
        raise EmptyMaskError("PCC needs at least two valid pixels")
    light = srgb_to_lightness(color)[m]
    inv = 1.0 / depth[m]
    if np.ptp(light) == 0 or np.ptp(inv) == 0:
        raise UndefinedCorrelationError("zero variance in lightness or inverse depth")
    return float(np.corrcoef(light, inv)[0, 1])


def build_report(**values: Optional[float]) -> Dict[str, Optional[float]]:
    """Report dictionary with every known key; missing entries are ``None``."""
    unknown = set(values) - set(REPORT_KEYS)
    if unknown:
        raise KeyError(f"unknown report keys: {sorted(unknown)}")
    return {k: (None if values.get(k) is None else float(values[k])) for k in REPORT_KEYS}


def report_to_text(report: Mapping[str, Optional[float]]) -> str:
    lines = []
    for k in REPORT_KEYS:
        v = report.get(k)
        lines.append(f"{k} = {'nan' if v is None else repr(float(v))}")
    return "\n".join(lines) + "\n"


def report_to_json(report: Mapping[str, Optional[float]]) -> str:
    return json.dumps({k: report.get(k) for k in REPORT_KEYS}, indent=2) + "\n"


def write_report(path: Path | str, report: Mapping[str, Optional[float]]) -> None:
    path = Path(path)
    text = report_to_text(report) if path.suffix in (".txt", ".kv") else report_to_json(report)
    path.write_text(text)
