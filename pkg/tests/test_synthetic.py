import numpy as np
import pytest

from consensus_pose.exceptions import ShapeError
from consensus_pose.geometry import bin_classes
from consensus_pose.selftest import SMALL_GRID
from consensus_pose.skeleton import ANNOTATED_NAMES, default_skeleton
from consensus_pose.synthetic import SyntheticNoise, annotation_for, full_pose, gen_synthetic, random_pose

SIZE = (40, 40)


def _classes(fields, kid=0):
    return np.argmax(fields.by_id()[kid].values, axis=2)


def test_noiseless_votes_are_exact():
    fields = gen_synthetic(np.array([[18.0, 22.0]]), grid=SMALL_GRID, image_size=SIZE, stride=4)
    field = fields.fields[0]
    assert field.shape == (10, 10) and field.values.dtype == np.float32
    np.testing.assert_array_equal(field.values.sum(axis=2), 1.0)
    rows, cols = np.indices((10, 10))
    np.testing.assert_array_equal(_classes(fields), bin_classes(4 - rows, 5 - cols, SMALL_GRID))
    assert fields.image_size == SIZE and fields.keypoint_ids == [0]


def test_missing_keypoint_votes_background():
    fields = gen_synthetic(np.array([[np.nan, np.nan]]), grid=SMALL_GRID, image_size=SIZE)
    assert np.all(_classes(fields) == SMALL_GRID.background_class)


def test_voters_follow_the_nearest_person():
    pose = np.array([[6.0, 6.0]])
    other = np.array([[34.0, 34.0]])
    fields = gen_synthetic(pose, SyntheticNoise(distractors=[other]), SMALL_GRID, image_size=SIZE)
    classes = _classes(fields)
    assert classes[1, 1] == SMALL_GRID.center_class
    assert classes[8, 8] == SMALL_GRID.center_class


def test_noise_extremes():
    pose = np.array([[18.0, 22.0]])
    everything = gen_synthetic(pose, SyntheticNoise(background=1.0), SMALL_GRID, image_size=SIZE)
    assert np.all(_classes(everything) == SMALL_GRID.background_class)
    relabeled = gen_synthetic(pose, SyntheticNoise(label=1.0), SMALL_GRID, image_size=SIZE)
    assert np.all(_classes(relabeled) != SMALL_GRID.background_class)


def test_seeded_noise_is_reproducible():
    pose = np.array([[18.0, 22.0]])
    noise = SyntheticNoise(label=0.3, background=0.3)
    first = gen_synthetic(pose, noise, SMALL_GRID, seed=7, image_size=SIZE)
    again = gen_synthetic(pose, noise, SMALL_GRID, seed=7, image_size=SIZE)
    other = gen_synthetic(pose, noise, SMALL_GRID, seed=8, image_size=SIZE)
    np.testing.assert_array_equal(first.fields[0].values, again.fields[0].values)
    assert not np.array_equal(first.fields[0].values, other.fields[0].values)


def test_invalid_inputs():
    with pytest.raises(ShapeError):
        gen_synthetic(np.array([[40.0, 0.0]]), grid=SMALL_GRID, image_size=SIZE)
    with pytest.raises(ShapeError):
        SyntheticNoise(label=1.5)


def test_random_pose_is_plausible():
    rng = np.random.default_rng(0)
    skeleton = default_skeleton()
    for _ in range(20):
        points = random_pose(rng)
        assert points.shape == (16, 2)
        assert np.all(points >= 24.0) and np.all(points <= 504 - 24.0)
        names = {name: n for n, name in enumerate(ANNOTATED_NAMES)}
        assert points[names["head_top"], 0] < points[names["pelvis"], 0] < points[names["r_ankle"], 0]
        full = full_pose(points)
        assert full.shape == (30, 2) and not np.isnan(full).any()
        for edge in skeleton.edges:
            assert np.linalg.norm(full[edge.i] - full[edge.j]) < 70.0
    with pytest.raises(ShapeError):
        random_pose(rng, (100, 100))


def test_annotation_for():
    points = random_pose(np.random.default_rng(4))
    annotation = annotation_for(points, person_id="p4")
    names = {name: n for n, name in enumerate(ANNOTATED_NAMES)}
    assert annotation.person_id == "p4"
    np.testing.assert_array_equal(annotation.head[0], points[names["head_top"]])
    assert annotation.head_length() > 0
    assert annotation.scale == pytest.approx(points[:, 0].max() - points[:, 0].min())
    centre = (points[names["thorax"]] + points[names["pelvis"]]) / 2
    np.testing.assert_allclose(annotation.position, centre)
    assert annotation.hint().center == annotation.position
