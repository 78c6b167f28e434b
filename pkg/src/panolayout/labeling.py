"""Four-class layout labels and dense CRF refinement guided by surface normals.

The CRF has two Gaussian pairwise kernels with Potts compatibility:

* a smoothness kernel over pixel position only, and
* a bilateral kernel over pixel position and surface normal.

Pixel distances wrap around the azimuth seam, so the spatial part of both
kernels factorises into a ``(H, H)`` row kernel and a circulant ``(W, W)``
column kernel. The normal term is handled by splatting pixels into groups of
identical normals. Message passing is exact while the number of distinct
normals fits ``max_normal_groups`` or the work budget ``exact_cost_budget``
(rendered Manhattan scenes have six). Beyond that the normals are clustered
and the sending side uses cluster centers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.cluster.vq import kmeans2, vq

from .pano_core import DomainError

logger = logging.getLogger(__name__)

CEILING, WALL, FLOOR, NOT_LAYOUT = 0, 1, 2, 3
N_CLASSES = 4
CLASS_NAMES = {CEILING: "ceiling", WALL: "wall", FLOOR: "floor", NOT_LAYOUT: "not-layout"}


class MappingError(ValueError):
    pass


@dataclass(frozen=True)
class CrfParams:
    sigma_smooth_px: float = 7.0
    sigma_bilateral_px: float = 35.0
    sigma_normal: float = 0.2
    iterations: int = 5
    smooth_weight: float = 1.0
    bilateral_weight: float = 1.0
    # "symmetric" scales messages by D^-1/2 K D^-1/2, "none" uses raw kernel sums
    normalization: str = "symmetric"
    max_normal_groups: int = 64
    # multiply-adds per bilateral pass allowed for exact grouping, H*W*(H+W)*groups
    exact_cost_budget: float = 2.0 ** 30
    downsample: int = 1

    def __post_init__(self):
        for name in ("sigma_smooth_px", "sigma_bilateral_px", "sigma_normal"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.smooth_weight < 0 or self.bilateral_weight < 0:
            raise ValueError("kernel weights must be non-negative")
        if self.normalization not in ("symmetric", "none"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.exact_cost_budget < 0:
            raise ValueError("exact_cost_budget must be non-negative")
        if self.max_normal_groups < 1 or self.downsample < 1:
            raise ValueError("max_normal_groups and downsample must be >= 1")


def map_to_layout_classes(labels: np.ndarray, mapping: Mapping[int, int]) -> np.ndarray:
    """Per-pixel lookup of fine semantic ids into the four layout classes."""
    labels = np.asarray(labels)
    ids = np.unique(labels)
    missing = [int(i) for i in ids if int(i) not in mapping]
    if missing:
        raise MappingError(f"label ids without a layout class: {missing}")
    bad = {k: v for k, v in mapping.items() if v not in CLASS_NAMES}
    if bad:
        raise MappingError(f"mapping targets outside 0..3: {bad}")
    lut = np.full(int(ids.max()) + 1, NOT_LAYOUT, dtype=np.uint8)
    for k, v in mapping.items():
        if 0 <= k < lut.size:
            lut[k] = v
    return lut[labels]


def build_unary(layout: np.ndarray, confidence: float = 0.75) -> np.ndarray:
    """Class probabilities per pixel, shape ``(H, W, 4)``.

    Known layout pixels put ``confidence`` on their class and spread the rest
    evenly; not-layout pixels get a flat distribution.
    """
    if not 0.25 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0.25, 1), got {confidence}")
    layout = np.asarray(layout)
    rest = (1.0 - confidence) / (N_CLASSES - 1)
    unary = np.full(layout.shape + (N_CLASSES,), rest)
    known = layout != NOT_LAYOUT
    onehot = np.eye(N_CLASSES)[np.clip(layout, 0, N_CLASSES - 1).astype(np.intp)]
    unary = np.where(known[..., None], unary + onehot * (confidence - rest), 0.25)
    return unary


def _row_kernel(height: int, sigma: float) -> np.ndarray:
    d = np.arange(height)[:, None] - np.arange(height)[None, :]
    return np.exp(-0.5 * (d / sigma) ** 2)


def _col_kernel(width: int, sigma: float) -> np.ndarray:
    d = np.abs(np.arange(width)[:, None] - np.arange(width)[None, :])
    d = np.minimum(d, width - d)
    return np.exp(-0.5 * (d / sigma) ** 2)


def _spatial_filter(x: np.ndarray, kv: np.ndarray, ku: np.ndarray) -> np.ndarray:
    """Apply ``kv`` along rows and ``ku`` along columns of ``x`` with shape (H, W, M)."""
    y = np.tensordot(kv, x, axes=(1, 0))
    return np.einsum("hwm,wx->hxm", y, ku, optimize=True)


def _normal_groups(normals: np.ndarray, valid: np.ndarray, max_groups: int):
    """Group valid normals; returns ``(centers, assignment)`` with -1 for invalid pixels."""
    assign = np.full(valid.shape, -1, dtype=np.intp)
    pts = normals[valid]
    if pts.size == 0:
        return np.zeros((0, 3)), assign
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    if len(uniq) <= max_groups:
        assign[valid] = inverse.reshape(-1)
        return uniq, assign
    logger.info("clustering %d distinct normals into %d groups", len(uniq), max_groups)
    centers, _ = kmeans2(uniq, max_groups, seed=0, minit="++")
    codes, _ = vq(pts, centers)
    assign[valid] = codes
    return centers, assign


_SPLAT_ELEMENTS = 1 << 22


class _Kernels:
    """Precomputed filtering state for one CRF problem."""

    def __init__(self, normals: np.ndarray, normals_valid: np.ndarray, params: CrfParams):
        h, w = normals_valid.shape
        self.params = params
        self.kv_s = _row_kernel(h, params.sigma_smooth_px)
        self.ku_s = _col_kernel(w, params.sigma_smooth_px)
        self.kv_b = _row_kernel(h, params.sigma_bilateral_px)
        self.ku_b = _col_kernel(w, params.sigma_bilateral_px)
        per_group = float(h * w * (h + w))
        limit = max(params.max_normal_groups, int(params.exact_cost_budget // per_group))
        self.centers, self.assign = _normal_groups(normals, normals_valid, limit)
        self.valid = normals_valid
        # normal affinity of every receiving pixel to every group center
        g = len(self.centers)
        if g:
            diff = normals[:, :, None, :] - self.centers[None, None, :, :]
            aff = np.exp(-np.sum(diff ** 2, axis=-1) / (2.0 * params.sigma_normal ** 2))
            self.affinity = np.where(normals_valid[..., None], aff, 0.0)
            own = np.take_along_axis(self.affinity, np.maximum(self.assign, 0)[..., None], axis=-1)[..., 0]
            self.self_affinity = np.where(normals_valid, own, 0.0)
        else:
            self.affinity = np.zeros((h, w, 0))
            self.self_affinity = np.zeros((h, w))

        ones = np.ones((h, w, 1))
        self.norm_s = self._scale(self._smooth_raw(ones)[..., 0])
        self.norm_b = self._scale(self._bilateral_raw(ones)[..., 0])

    def _scale(self, degree: np.ndarray) -> np.ndarray:
        if self.params.normalization == "none":
            return np.ones_like(degree)
        with np.errstate(divide="ignore"):
            return np.where(degree > 0, 1.0 / np.sqrt(np.maximum(degree, 1e-300)), 0.0)

    def _smooth_raw(self, x: np.ndarray) -> np.ndarray:
        return _spatial_filter(x, self.kv_s, self.ku_s) - x

    def _bilateral_raw(self, x: np.ndarray) -> np.ndarray:
        h, w, m = x.shape
        g = len(self.centers)
        out = np.zeros_like(x)
        # groups in chunks keep the splat buffer near _SPLAT_ELEMENTS
        step = max(1, _SPLAT_ELEMENTS // (h * w * m))
        for g0 in range(0, g, step):
            ids = np.arange(g0, min(g, g0 + step))
            onehot = (self.assign[..., None] == ids).astype(np.float64)
            splat = (onehot[..., :, None] * x[..., None, :]).reshape(h, w, ids.size * m)
            filt = _spatial_filter(splat, self.kv_b, self.ku_b).reshape(h, w, ids.size, m)
            out += np.einsum("hwg,hwgm->hwm", self.affinity[..., ids], filt, optimize=True)
        out -= self.self_affinity[..., None] * x
        return np.where(self.valid[..., None], out, 0.0)

    def messages(self, q: np.ndarray) -> np.ndarray:
        p = self.params
        out = np.zeros_like(q)
        if p.smooth_weight:
            s = self.norm_s[..., None]
            out += p.smooth_weight * s * self._smooth_raw(s * q)
        if p.bilateral_weight:
            b = self.norm_b[..., None]
            out += p.bilateral_weight * b * self._bilateral_raw(b * q)
        return out


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_inputs(unary: np.ndarray, normals: np.ndarray, normals_valid: Optional[np.ndarray]):
    unary = np.asarray(unary, dtype=np.float64)
    normals = np.asarray(normals, dtype=np.float64)
    if unary.ndim != 3 or unary.shape[-1] != N_CLASSES:
        raise DomainError(f"unary must have shape (H, W, 4), got {unary.shape}")
    if normals.shape != unary.shape[:2] + (3,):
        raise DomainError(f"normals shape {normals.shape} does not match unary {unary.shape[:2]}")
    if normals_valid is None:
        normals_valid = np.isfinite(normals).all(axis=-1) & (np.abs(normals).sum(axis=-1) > 0)
    normals = np.where(normals_valid[..., None], normals, 0.0)
    return unary, normals, np.asarray(normals_valid, dtype=bool)


def crf_marginals(
    unary: np.ndarray,
    normals: np.ndarray,
    params: CrfParams = CrfParams(),
    normals_valid: Optional[np.ndarray] = None,
    on_iteration: Optional[Callable[[int, np.ndarray], None]] = None,
) -> np.ndarray:
    """Mean-field marginals of the dense CRF, shape ``(H, W, 4)``.

    ``on_iteration(i, q)`` is called after every update with a read-only view.
    Pixels with a zero or non-finite normal take no part in the bilateral term.
    """
    unary, normals, normals_valid = _check_inputs(unary, normals, normals_valid)
    f = params.downsample
    if f > 1:
        h, w = unary.shape[:2]
        coarse = CrfParams(
            params.sigma_smooth_px / f, params.sigma_bilateral_px / f, params.sigma_normal,
            params.iterations, params.smooth_weight, params.bilateral_weight,
            params.normalization, params.max_normal_groups, params.exact_cost_budget, 1,
        )
        q = crf_marginals(unary[::f, ::f], normals[::f, ::f], coarse,
                          normals_valid[::f, ::f], on_iteration)
        return np.repeat(np.repeat(q, f, axis=0), f, axis=1)[:h, :w]

    log_unary = np.log(np.clip(unary, 1e-12, None))
    kernels = _Kernels(normals, normals_valid, params)
    q = _softmax(log_unary)
    for i in range(params.iterations):
        q = _softmax(log_unary + kernels.messages(q))
        if on_iteration is not None:
            view = q.view()
            view.flags.writeable = False
            on_iteration(i, view)
    return q


def crf_refine(
    unary: np.ndarray,
    normals: np.ndarray,
    params: CrfParams = CrfParams(),
    normals_valid: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Refined layout class map: per-pixel argmax of the CRF marginals."""
    q = crf_marginals(unary, normals, params, normals_valid)
    return np.argmax(q, axis=-1).astype(np.uint8)


def crf_marginals_bruteforce(
    unary: np.ndarray,
    normals: np.ndarray,
    params: CrfParams = CrfParams(),
    normals_valid: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Reference mean-field with explicit ``N x N`` pairwise kernels.

    Only meant for small grids; memory grows with the square of the pixel count.
    """
    unary, normals, normals_valid = _check_inputs(unary, normals, normals_valid)
    h, w = unary.shape[:2]
    n = h * w
    if n > 20000:
        raise DomainError(f"brute-force CRF refuses {n} pixels")
    vv, uu = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    vv, uu = vv.reshape(-1), uu.reshape(-1)
    du = np.abs(uu[:, None] - uu[None, :])
    du = np.minimum(du, w - du).astype(np.float64)
    dv = (vv[:, None] - vv[None, :]).astype(np.float64)
    d2 = du ** 2 + dv ** 2
    nrm = normals.reshape(n, 3)
    ok = normals_valid.reshape(n)
    dn2 = np.sum((nrm[:, None, :] - nrm[None, :, :]) ** 2, axis=-1)

    k_s = np.exp(-d2 / (2 * params.sigma_smooth_px ** 2))
    k_b = np.exp(-d2 / (2 * params.sigma_bilateral_px ** 2) - dn2 / (2 * params.sigma_normal ** 2))
    k_b *= ok[:, None] & ok[None, :]
    np.fill_diagonal(k_s, 0.0)
    np.fill_diagonal(k_b, 0.0)

    def normalized(k):
        if params.normalization == "none":
            return k
        deg = k.sum(axis=1)
        s = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
        return s[:, None] * k * s[None, :]

    k_s, k_b = normalized(k_s), normalized(k_b)
    log_unary = np.log(np.clip(unary.reshape(n, N_CLASSES), 1e-12, None))
    q = _softmax(log_unary)
    for _ in range(params.iterations):
        msg = params.smooth_weight * (k_s @ q) + params.bilateral_weight * (k_b @ q)
        q = _softmax(log_unary + msg)
    return q.reshape(h, w, N_CLASSES)
