import math

import numpy as np
import pytest

from panolayout.labeling import CEILING, FLOOR, NOT_LAYOUT, WALL
from panolayout.pano_core import lift_depth
from panolayout.synth import CuboidScene, oracle_plane_distance, perturb_labels, render_cuboid


def test_scene_requires_camera_inside():
    with pytest.raises(ValueError):
        CuboidScene(x_min=0.5)
    with pytest.raises(ValueError):
        CuboidScene(y_ceil=-0.1)


def test_rendered_points_lie_on_planes(small_room):
    cloud = lift_depth(small_room.depth)
    assert cloud.valid.all()
    dist = oracle_plane_distance(CuboidScene(width=64, height=32), cloud.points)
    assert dist.max() < 1e-12


def test_labels_and_normals_agree(small_room):
    lab, n = small_room.labels, small_room.normals
    assert set(np.unique(lab)) == {CEILING, WALL, FLOOR}
    np.testing.assert_array_equal(n[lab == CEILING][:, 1], -1.0)
    np.testing.assert_array_equal(n[lab == FLOOR][:, 1], 1.0)
    assert np.all(n[lab == WALL][:, 1] == 0)
    assert (lab[0] == CEILING).all() and (lab[-1] == FLOOR).all()


def test_boundaries_match_label_edges():
    scene = CuboidScene(width=256, height=128)
    r = render_cuboid(scene)
    h = scene.height
    for u in range(0, 256, 17):
        col = r.labels[:, u]
        last_ceiling = np.flatnonzero(col == CEILING).max()
        first_floor = np.flatnonzero(col == FLOOR).min()
        # boundary latitude falls between the two pixel centers around the edge
        assert (last_ceiling + 0.5) * math.pi / h <= r.top.latitudes[u] <= (last_ceiling + 1.5) * math.pi / h
        assert (first_floor - 0.5) * math.pi / h <= r.bottom.latitudes[u] <= (first_floor + 0.5) * math.pi / h


def test_symmetric_room_mirrors_boundaries():
    scene = CuboidScene.random(np.random.default_rng(0), 128, 64, symmetric=True)
    assert scene.y_ceil == pytest.approx(-scene.y_floor)
    r = render_cuboid(scene)
    np.testing.assert_allclose(r.bottom.latitudes, math.pi - r.top.latitudes, atol=1e-12)


def test_random_camera_offset_raises_camera():
    base = CuboidScene.random(np.random.default_rng(5), symmetric=True)
    up = CuboidScene.random(np.random.default_rng(5), symmetric=True, camera_offset=0.2)
    assert up.y_ceil == pytest.approx(base.y_ceil - 0.2)
    assert up.y_floor == pytest.approx(base.y_floor - 0.2)


def test_top_radius_matches_depth():
    scene = CuboidScene(x_min=-1.7, x_max=2.9, z_min=-3.1, z_max=1.4, y_floor=-1.5, y_ceil=1.1)
    phi = (np.arange(scene.width) + 0.5) * 2 * math.pi / scene.width
    r = scene.top_radius(phi)
    theta = scene.top_latitude(phi)
    np.testing.assert_allclose(r * np.cos(theta), scene.y_ceil)


def test_perturb_labels_fraction_and_determinism(small_room):
    a = perturb_labels(small_room, 0.1, seed=3)
    b = perturb_labels(small_room.labels, 0.1, seed=3)
    np.testing.assert_array_equal(a, b)
    holes = a == NOT_LAYOUT
    assert 0.1 <= holes.mean() < 0.2
    np.testing.assert_array_equal(a[~holes], small_room.labels[~holes])
    assert not np.array_equal(a, perturb_labels(small_room, 0.1, seed=4))
    np.testing.assert_array_equal(perturb_labels(small_room, 0.0, seed=1), small_room.labels)
    with pytest.raises(ValueError):
        perturb_labels(small_room, 0.9, seed=1)
