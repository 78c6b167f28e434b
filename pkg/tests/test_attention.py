import math

import numpy as np
import pytest

from panolayout.attention import (
    AttentionMap,
    AttentionParams,
    apply_residual_attention,
    build_attention,
    gaussian_kernel,
    resample_attention,
    spherical_blur,
)
from panolayout.boundary import BoundaryVector


def _top(w, seed=0):
    rng = np.random.default_rng(seed)
    return BoundaryVector(rng.uniform(0.3, 1.3, w), np.ones(w, bool), "top")


def test_values_follow_formula():
    p = AttentionParams(sigma_deg=10.0)
    top = BoundaryVector(np.full(4, 1.0), np.ones(4, bool))
    a = build_attention(top, p, 4, 8).values
    theta = (np.arange(8) + 0.5) * math.pi / 8
    s = math.radians(10.0)
    expected = np.exp(-np.abs(theta - 1.0) / (2 * s * s)) / (s * math.sqrt(2 * math.pi))
    np.testing.assert_allclose(a[:, 0], expected)
    sq = build_attention(top, AttentionParams(sigma_deg=10.0, distance="squared"), 4, 8).values
    np.testing.assert_allclose(sq[:, 0], np.exp(-(theta - 1.0) ** 2 / (2 * s * s)) / (s * math.sqrt(2 * math.pi)))
    signed = build_attention(top, AttentionParams(sigma_deg=10.0, distance="signed"), 4, 8).values
    np.testing.assert_allclose(signed[:, 0], np.exp(-(theta - 1.0) / (2 * s * s)) / (s * math.sqrt(2 * math.pi)))


def test_invalid_meridians_filled():
    lat = np.full(6, 0.8)
    valid = np.array([True, True, False, True, True, False])
    top = BoundaryVector(np.where(valid, lat, np.nan), valid)
    a = build_attention(top, AttentionParams(), 6, 12).values
    np.testing.assert_allclose(a[:, 2], a[:, valid].mean())
    z = build_attention(top, AttentionParams(invalid_fill="zero"), 6, 12).values
    assert not z[:, 5].any()


def test_hash_tracks_boundary():
    a = build_attention(_top(16, 0), AttentionParams(), 16, 8)
    b = build_attention(_top(16, 0), AttentionParams(), 16, 8)
    c = build_attention(_top(16, 1), AttentionParams(), 16, 8)
    assert a.source_hash == b.source_hash != c.source_hash


def test_params_validation():
    for bad in (dict(sigma_deg=0), dict(distance="l2"), dict(blur_kernel=4), dict(blur_passes=-1),
                dict(invalid_fill="x"), dict(normalize="sum")):
        with pytest.raises(ValueError):
            AttentionParams(**bad)
    with pytest.raises(ValueError):
        build_attention(_top(8), AttentionParams(), 10, 5)


def test_gaussian_kernel_normalized_symmetric():
    k = gaussian_kernel(5, 1.0)
    assert k.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(k, k[::-1])


def test_blur_crosses_poles():
    a = np.zeros((8, 16))
    a[0, 3] = 1.0
    out = spherical_blur(a, AttentionParams(blur_passes=1))
    # mass leaks over the zenith into the column half a turn away
    assert out[0, 3 + 8] > 0
    assert out.sum() == pytest.approx(1.0)


def test_blur_keeps_map_type():
    amap = build_attention(_top(32), AttentionParams(), 32, 16)
    out = spherical_blur(amap, AttentionParams())
    assert isinstance(out, AttentionMap) and out.source_hash == amap.source_hash
    identity = spherical_blur(amap.values, AttentionParams(blur_passes=0))
    np.testing.assert_array_equal(identity, amap.values)


def test_resample_preserves_constants_and_shapes():
    c = np.full((16, 32), 3.0)
    for shape in ((8, 16), (4, 8), (32, 64), (10, 30)):
        np.testing.assert_allclose(resample_attention(c, *shape), 3.0)


def test_residual_attention_modes():
    f = np.ones((8, 16, 2))
    amap = build_attention(_top(16), AttentionParams(), 16, 8)
    direct = apply_residual_attention(f, amap, "direct")
    comp = apply_residual_attention(f, amap, "complement")
    assert direct.max() == pytest.approx(2.0)
    assert direct.min() >= 1.0 and comp.min() >= 1.0
    raw = apply_residual_attention(f, amap.values, "direct", normalize="raw")
    np.testing.assert_allclose(raw[..., 0], 1.0 + amap.values)
    with pytest.raises(ValueError):
        apply_residual_attention(f, amap, "both")


def test_peak_value_on_boundary_row():
    h = 16
    theta0 = (5 + 0.5) * math.pi / h
    a = build_attention(BoundaryVector(np.full(8, theta0), np.ones(8, bool)), AttentionParams(), 8, h).values
    s = math.radians(9.5)
    np.testing.assert_allclose(a[5], 1 / (s * math.sqrt(2 * math.pi)))
    # columns for shifted boundaries are vertical translations
    b = build_attention(BoundaryVector(np.full(8, theta0 + 2 * math.pi / h), np.ones(8, bool)),
                        AttentionParams(), 8, h).values
    np.testing.assert_allclose(b[2:9], a[0:7], rtol=1e-12)


def test_build_and_blur_commute_with_shift():
    top = _top(32, 3)
    p = AttentionParams()
    a = spherical_blur(build_attention(top, p, 32, 16), p).values
    b = spherical_blur(build_attention(top.roll(9), p, 32, 16), p).values
    np.testing.assert_allclose(b, np.roll(a, 9, axis=1), atol=1e-14)


def test_blur_contracts_and_keeps_mass():
    rng = np.random.default_rng(4)
    h, w = 128, 256
    a = rng.random((h, w))
    a[:16] = 0.0
    a[-16:] = 0.0
    out = spherical_blur(a, AttentionParams())
    assert out.max() <= a.max()
    # plain pixel mass is conserved exactly; the sin-weighted mass drifts by
    # about passes * sigma^2 * (pi / h)^2 / 2 from the curvature of the weights
    assert out.sum() == pytest.approx(a.sum(), rel=1e-12)
    weights = np.sin((np.arange(h) + 0.5) * math.pi / h)[:, None]
    assert abs((out * weights).sum() / (a * weights).sum() - 1) < 1e-3


def test_residual_degenerate_maps():
    f = np.random.default_rng(5).random((8, 16))
    np.testing.assert_array_equal(apply_residual_attention(f, np.zeros((8, 16)), "direct"), f)
    ones = np.ones((8, 16))
    np.testing.assert_allclose(apply_residual_attention(f, ones, "direct"), 2 * f)
    np.testing.assert_allclose(apply_residual_attention(f, ones, "complement"), f)
    amap = build_attention(_top(16), AttentionParams(), 16, 8)
    assert np.all(apply_residual_attention(f, amap, "direct") >= f)
