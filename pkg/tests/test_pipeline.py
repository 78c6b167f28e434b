import numpy as np

from panolayout.config import PipelineConfig, config_from_dict
from panolayout.pipeline import extract_cues
from panolayout.synth import CuboidScene, render_cuboid


def test_clean_labels_give_valid_scene():
    r = render_cuboid(CuboidScene(width=128, height=64))
    cues = extract_cues(r.labels, r.depth, r.normals)
    assert cues.scene_valid and cues.layout_mask.all()
    assert np.max(np.abs(cues.top.latitudes - r.top.latitudes)) < np.pi / 64
    assert abs(cues.heights.y_ceil_mean - 1.3) < 1e-12


def test_fine_label_mapping():
    r = render_cuboid(CuboidScene(width=64, height=32))
    fine = np.choose(r.labels, [10, 20, 30])
    cfg = config_from_dict({"mapping": {"10": 0, "20": 1, "30": 2}})
    a = extract_cues(fine, r.depth, r.normals, cfg)
    b = extract_cues(r.labels, r.depth, r.normals, PipelineConfig())
    np.testing.assert_array_equal(a.top.latitudes, b.top.latitudes)
