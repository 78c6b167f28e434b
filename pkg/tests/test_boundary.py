import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from panolayout.boundary import (
    BoundaryVector,
    from_normalized,
    greedy_vertical_edges,
    mad_reject,
    median_filter_boundary,
    to_normalized,
)
from panolayout.labeling import CEILING, FLOOR, NOT_LAYOUT, WALL
from panolayout.pano_core import DomainError


def _column(h, ceil_rows, floor_rows):
    col = np.full(h, WALL)
    col[:ceil_rows] = CEILING
    col[h - floor_rows:] = FLOOR
    return col


def test_greedy_edges_at_row_borders():
    h = 16
    layout = np.stack([_column(h, 3, 5), _column(h, 4, 2)], axis=1)
    top, bottom = greedy_vertical_edges(layout)
    np.testing.assert_allclose(top.latitudes, [3 * math.pi / h, 4 * math.pi / h])
    np.testing.assert_allclose(bottom.latitudes, [11 * math.pi / h, 14 * math.pi / h])
    assert top.valid.all() and bottom.valid.all()
    assert top.kind == "top" and bottom.kind == "bottom"


def test_greedy_edges_invalid_cases():
    h = 16
    no_ceiling = _column(h, 0, 4)
    deep_ceiling = _column(h, 10, 2)
    holes = _column(h, 3, 3)
    holes[3] = NOT_LAYOUT
    top, bottom = greedy_vertical_edges(np.stack([no_ceiling, deep_ceiling, holes], axis=1))
    np.testing.assert_array_equal(top.valid, [False, False, True])
    assert np.isnan(top.latitudes[:2]).all()
    assert bottom.valid.all()


def test_boundary_vector_validation_and_ops():
    b = BoundaryVector([0.1, 0.2, 0.3], [True, False, True])
    np.testing.assert_array_equal(b.roll(1).latitudes, [0.3, 0.1, 0.2])
    np.testing.assert_array_equal(b.flip().valid, [True, False, True])
    with pytest.raises(DomainError):
        BoundaryVector([0.1, 0.2], [True])
    with pytest.raises(DomainError):
        BoundaryVector([0.1], [True], kind="left")


def test_median_removes_spike_and_wraps():
    lat = np.full(20, 0.8)
    lat[0] = 0.2
    b = median_filter_boundary(BoundaryVector(lat, np.ones(20, bool)), 5)
    np.testing.assert_allclose(b.latitudes, 0.8)


def test_median_keeps_invalid_unless_filling():
    lat = np.linspace(0.5, 0.7, 10)
    valid = np.ones(10, bool)
    valid[4] = False
    lat[4] = np.nan
    b = BoundaryVector(lat, valid)
    kept = median_filter_boundary(b, 3)
    assert not kept.valid[4] and np.isnan(kept.latitudes[4])
    filled = median_filter_boundary(b, 3, fill_invalid=True)
    assert filled.valid[4]
    assert filled.latitudes[4] == pytest.approx(np.median([lat[3], lat[5]]))
    with pytest.raises(ValueError):
        median_filter_boundary(b, 4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 1.5), min_size=5, max_size=40), st.integers(0, 50))
def test_median_commutes_with_roll(values, offset):
    b = BoundaryVector(values, np.ones(len(values), bool))
    np.testing.assert_array_equal(median_filter_boundary(b.roll(offset)).latitudes,
                                  median_filter_boundary(b).roll(offset).latitudes)


def test_mad_rejects_outliers_only():
    rng = np.random.default_rng(0)
    lat = 0.8 + 0.01 * rng.standard_normal(100)
    lat[[7, 50]] = [1.3, 0.3]
    out = mad_reject(BoundaryVector(lat, np.ones(100, bool)))
    assert not out.valid[7] and not out.valid[50]
    assert out.valid.sum() >= 95


def test_mad_zero_spread_and_too_few():
    flat = BoundaryVector(np.full(20, 0.7), np.ones(20, bool))
    assert mad_reject(flat).valid.all()
    few = BoundaryVector([0.1, 0.9, 0.5], [True, True, True])
    out = mad_reject(few)
    assert out.valid.all()
    assert out.diagnostics and "skipped" in out.diagnostics[0]


def test_normalized_heights_round_trip():
    b = BoundaryVector([0.0, math.pi / 4, math.pi / 2], [True, True, True])
    h = to_normalized(b)
    np.testing.assert_allclose(h, [1.0, 0.5, 0.0])
    np.testing.assert_allclose(from_normalized(h).latitudes, b.latitudes)
    with pytest.raises(DomainError):
        to_normalized(BoundaryVector([2.0], [True]))
    with pytest.raises(DomainError):
        from_normalized([1.5])
