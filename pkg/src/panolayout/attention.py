"""Layout-derived attention maps on the sphere."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundaryVector
from .pano_core import haversine_lat


@dataclass(frozen=True)
class AttentionParams:
    sigma_deg: float = 9.5
    blur_kernel: int = 5
    blur_sigma_px: float = 1.0
    blur_passes: int = 2
    # exponent term: "abs" uses |h|, "squared" h^2 (a true Gaussian), "signed" the raw haversine
    distance: str = "abs"
    invalid_fill: str = "mean"
    normalize: str = "max"

    def __post_init__(self):
        if not self.sigma_deg > 0:
            raise ValueError("sigma_deg must be > 0")
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise ValueError("blur_kernel must be odd")
        if self.blur_passes < 0 or not self.blur_sigma_px > 0:
            raise ValueError("blur_passes must be >= 0 and blur_sigma_px > 0")
        if self.distance not in ("abs", "squared", "signed"):
            raise ValueError(f"distance must be 'abs', 'squared' or 'signed', got {self.distance!r}")
        if self.invalid_fill not in ("mean", "zero"):
            raise ValueError(f"invalid_fill must be 'mean' or 'zero', got {self.invalid_fill!r}")
        if self.normalize not in ("max", "raw"):
            raise ValueError(f"normalize must be 'max' or 'raw', got {self.normalize!r}")

    @property
    def sigma(self) -> float:
        return math.radians(self.sigma_deg)


@dataclass
class AttentionMap:
    values: np.ndarray
    sigma: float
    source_hash: str = field(default="")


def _boundary_hash(b: BoundaryVector) -> str:
    h = hashlib.sha1()
    h.update(np.ascontiguousarray(np.nan_to_num(b.latitudes)).tobytes())
    h.update(np.ascontiguousarray(b.valid).tobytes())
    return h.hexdigest()


def build_attention(top: BoundaryVector, params: AttentionParams, width: int, height: int) -> AttentionMap:
    """Per-meridian latitude kernel centred on the top boundary.

    ``A = exp(-d / (2 sigma^2)) / (sigma sqrt(2 pi))`` where ``d`` is the
    haversine distance to the boundary, taken absolute, squared or signed
    per ``params.distance``. Only the first two peak on the boundary.
    Invalid meridians are filled with the mean of the valid part of the map,
    or zero.
    """
    if top.width != width:
        raise ValueError(f"boundary width {top.width} != map width {width}")
    sigma = params.sigma
    theta = (np.arange(height) + 0.5) * math.pi / height
    lat = np.where(top.valid, top.latitudes, 0.0)
    d = haversine_lat(lat[None, :], theta[:, None])
    if params.distance == "abs":
        d = np.abs(d)
    elif params.distance == "squared":
        d = d * d
    a = np.exp(-d / (2.0 * sigma * sigma)) / (sigma * math.sqrt(2.0 * math.pi))
    if not top.valid.all():
        fill = a[:, top.valid].mean() if (params.invalid_fill == "mean" and top.valid.any()) else 0.0
        a[:, ~top.valid] = fill
    return AttentionMap(a, sigma, _boundary_hash(top))


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - size // 2
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _pad_poles(a: np.ndarray, pad: int) -> np.ndarray:
    """Pad rows by reflecting across each pole with a half-turn azimuth shift."""
    h, w = a.shape[:2]
    if pad == 0:
        return a
    if w % 2:
        raise ValueError("pole-crossing padding needs an even width")
    turned = np.roll(a, w // 2, axis=1)
    top = turned[:pad][::-1]
    bottom = turned[h - pad:][::-1]
    return np.concatenate([top, a, bottom], axis=0)


def _blur_once(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    r = k.size // 2
    out = np.zeros_like(a)
    for i, wgt in enumerate(k):
        out += wgt * np.roll(a, r - i, axis=1)
    padded = _pad_poles(out, r)
    h = a.shape[0]
    res = np.zeros_like(a)
    for i, wgt in enumerate(k):
        res += wgt * padded[i:i + h]
    return res


def spherical_blur(a: AttentionMap | np.ndarray, params: AttentionParams) -> AttentionMap | np.ndarray:
    """Separable Gaussian blur that wraps at the seam and crosses the poles."""
    values = a.values if isinstance(a, AttentionMap) else np.asarray(a, dtype=np.float64)
    if params.blur_kernel // 2 > values.shape[0]:
        raise ValueError("blur kernel taller than the map")
    k = gaussian_kernel(params.blur_kernel, params.blur_sigma_px)
    out = values
    for _ in range(params.blur_passes):
        out = _blur_once(out, k)
    if isinstance(a, AttentionMap):
        return AttentionMap(out, a.sigma, a.source_hash)
    return out


def _resample_matrix(n_in: int, n_out: int, wrap: bool) -> np.ndarray:
    """Linear operator taking ``n_in`` samples to ``n_out``.

    Shrinking averages over covered areas; enlarging interpolates linearly
    between pixel centers (wrapping when ``wrap`` is set).
    """
    m = np.zeros((n_out, n_in))
    if n_out <= n_in:
        scale = n_in / n_out
        for i in range(n_out):
            lo, hi = i * scale, (i + 1) * scale
            for j in range(int(math.floor(lo)), int(math.ceil(hi))):
                overlap = min(hi, j + 1) - max(lo, j)
                if overlap > 0:
                    m[i, j] = overlap / scale
        return m
    pos = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
    j0 = np.floor(pos).astype(int)
    frac = pos - j0
    for i in range(n_out):
        a, b = j0[i], j0[i] + 1
        if wrap:
            a, b = a % n_in, b % n_in
        else:
            a, b = min(max(a, 0), n_in - 1), min(max(b, 0), n_in - 1)
        m[i, a] += 1.0 - frac[i]
        m[i, b] += frac[i]
    return m


def resample_attention(values: np.ndarray, height: int, width: int) -> np.ndarray:
    h, w = values.shape[:2]
    rv = _resample_matrix(h, height, wrap=False)
    ru = _resample_matrix(w, width, wrap=True)
    return rv @ values @ ru.T


def apply_residual_attention(
    features: np.ndarray,
    a: AttentionMap | np.ndarray,
    mode: str = "direct",
    normalize: str = "max",
) -> np.ndarray:
    """Residual attention ``f + f * D(A)`` or, for ``mode="complement"``, ``f + f * (1 - D(A))``.

    ``features`` is ``(h, w)`` or ``(h, w, C)`` at any resolution; the map is
    resampled to it and, unless ``normalize="raw"``, scaled to a peak of 1.
    """
    if mode not in ("direct", "complement"):
        raise ValueError(f"mode must be 'direct' or 'complement', got {mode!r}")
    f = np.asarray(features, dtype=np.float64)
    values = a.values if isinstance(a, AttentionMap) else np.asarray(a, dtype=np.float64)
    d = resample_attention(values, f.shape[0], f.shape[1])
    if normalize == "max":
        peak = d.max()
        if peak > 0:
            d = d / peak
    if f.ndim == 3:
        d = d[..., None]
    gate = d if mode == "direct" else 1.0 - d
    return f + f * gate
