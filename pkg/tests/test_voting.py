import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from consensus_pose.exceptions import GridError, ShapeError
from consensus_pose.geometry import build_kernel, coarse_kernel
from consensus_pose.models import Heatmap, LogPolarGrid, VoterField
from consensus_pose.selftest import SMALL_GRID, random_distributions, random_field
from consensus_pose.voting import (
    aggregate,
    apply_person_mask,
    naive_aggregate,
    person_mask,
    pool_heatmap,
    single_vote,
)

KERNEL = build_kernel(SMALL_GRID, 9, 9)
GRID = LogPolarGrid()
DEFAULT_KERNEL = build_kernel(GRID, 65, 65)


def _field(values, stride=4, grid=SMALL_GRID, kid=0):
    return VoterField(keypoint_id=kid, values=values, stride=stride, grid=grid)


def _one_hot(shape, cls, grid=SMALL_GRID):
    values = np.zeros(tuple(shape) + (grid.num_classes,))
    values[..., cls] = 1.0
    return values


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_aggregate_matches_literal_sum(seed):
    field = random_field(np.random.default_rng(seed), max_side=7)
    fast = aggregate(field, KERNEL)
    slow = naive_aggregate(field, KERNEL)
    assert fast.offset == slow.offset == (-4, -4)
    np.testing.assert_allclose(fast.values, slow.values, atol=1e-12)


def test_aggregate_is_sum_of_single_votes(rng):
    field = random_field(rng, max_side=5)
    total = np.zeros_like(aggregate(field, KERNEL).values)
    height, width = field.shape
    for r in range(height):
        for c in range(width):
            total += single_vote(field, (r, c), KERNEL).values
    np.testing.assert_allclose(total, aggregate(field, KERNEL).values, atol=1e-12)


def test_center_votes_reproduce_the_field_extent():
    field = _field(_one_hot((3, 5), SMALL_GRID.center_class))
    heatmap = aggregate(field, KERNEL)
    assert heatmap.shape == (3 + 8, 5 + 8)
    np.testing.assert_allclose(heatmap.values[4:7, 4:9], 1.0)
    assert heatmap.total() == pytest.approx(15.0)


def test_background_votes_nothing():
    field = _field(_one_hot((4, 4), SMALL_GRID.background_class))
    assert aggregate(field, KERNEL).total() == 0.0


def test_single_vote_spreads_over_its_bin():
    cls = SMALL_GRID.ring_class(1, 0)
    values = _one_hot((6, 6), SMALL_GRID.background_class)
    values[2, 3] = 0.0
    values[2, 3, cls] = 1.0
    vote = single_vote(_field(values), (2, 3), KERNEL)
    assert vote.total() == pytest.approx(1.0)
    cells = np.argwhere(vote.values > 0)
    assert len(cells) == KERNEL.bin_sizes[cls]
    np.testing.assert_allclose(vote.values[vote.values > 0], 1.0 / KERNEL.bin_sizes[cls])
    with pytest.raises(ShapeError):
        single_vote(_field(values), (6, 0), KERNEL)


def test_class_mismatch():
    field = _field(_one_hot((2, 2), 0, LogPolarGrid()), grid=LogPolarGrid())
    with pytest.raises(ShapeError):
        aggregate(field, KERNEL)


def test_person_mask():
    assert np.all(person_mask((4, 4), (1.0, 1.0), math.inf) == 1.0)
    mask = person_mask((9, 9), (4.0, 4.0), 2.0)
    assert mask[4, 4] == 1.0
    assert mask[4, 6] == pytest.approx(math.exp(-0.5))
    assert mask[0, 0] < mask[2, 2] < mask[4, 4]


def test_apply_person_mask():
    heatmap = Heatmap(keypoint_id=3, values=np.ones((9, 9)), offset=(-4, -4), stride=4)
    masked = apply_person_mask(heatmap, (4.0, 4.0), 2.0, sigma_factor=1.0)
    assert masked.offset == heatmap.offset and masked.keypoint_id == 3
    assert masked.values[4, 4] == 1.0 and masked.values[0, 0] < 0.05
    unchanged = apply_person_mask(heatmap, (4.0, 4.0), math.inf)
    np.testing.assert_array_equal(unchanged.values, heatmap.values)
    with pytest.raises(ShapeError):
        apply_person_mask(heatmap, (9.0, 0.0), 2.0)
    with pytest.raises(GridError):
        apply_person_mask(heatmap, (4.0, 4.0), 0.0)


def test_pool_heatmap_crops_and_sums():
    values = np.zeros((5 + 8, 7 + 8))
    values[4:9, 4:11] = np.arange(35, dtype=np.float64).reshape(5, 7)
    values[0, 0] = 100.0  # outside the field extent
    heatmap = Heatmap(keypoint_id=0, values=values, offset=(-4, -4), stride=4)
    pooled = pool_heatmap(heatmap, (5, 7), 3)
    assert pooled.shape == (2, 3)
    assert pooled.stride == 12 and pooled.offset == (0, 0)
    assert pooled.total() == pytest.approx(np.arange(35).sum())
    expected = np.arange(35).reshape(5, 7)[:3, :3].sum()
    assert pooled.values[0, 0] == pytest.approx(expected)


def test_aggregate_matches_literal_sum_on_default_grid(rng):
    field = _field(random_distributions(rng, (5, 6), GRID.num_classes), grid=GRID)
    fast = aggregate(field, DEFAULT_KERNEL)
    assert fast.shape == (5 + 64, 6 + 64)
    np.testing.assert_allclose(fast.values, naive_aggregate(field, DEFAULT_KERNEL).values, atol=1e-9)


def test_aggregate_with_pooled_kernel(rng):
    pooled = coarse_kernel(SMALL_GRID, stride=4, coarse_factor=8, keep_rings=2)
    field = random_field(rng, max_side=6)
    np.testing.assert_allclose(aggregate(field, pooled).values, naive_aggregate(field, pooled).values, atol=1e-12)
    assert aggregate(field, pooled).total() == pytest.approx(float((1.0 - field.values[..., -1]).sum()))


def test_aggregate_conserves_mass(rng):
    field = _field(random_distributions(rng, (12, 9), GRID.num_classes), grid=GRID)
    expected = float((1.0 - field.values[..., GRID.background_class]).sum())
    assert aggregate(field, DEFAULT_KERNEL).total() == pytest.approx(expected, rel=1e-6)


def test_aggregate_is_linear(rng):
    first = random_distributions(rng, (7, 8), SMALL_GRID.num_classes)
    second = random_distributions(rng, (7, 8), SMALL_GRID.num_classes)
    alpha = 0.3
    mixed = aggregate(_field(alpha * first + (1 - alpha) * second), KERNEL)
    separate = alpha * aggregate(_field(first), KERNEL).values + (1 - alpha) * aggregate(_field(second), KERNEL).values
    np.testing.assert_allclose(mixed.values, separate, atol=1e-9)


@pytest.mark.parametrize("shift", [(0, 1), (2, 0), (3, 4)])
def test_aggregate_is_translation_equivariant(rng, shift):
    block = random_distributions(rng, (4, 4), SMALL_GRID.num_classes)
    base = _one_hot((10, 10), SMALL_GRID.background_class)
    moved = base.copy()
    base[1:5, 1:5] = block
    moved[1 + shift[0]:5 + shift[0], 1 + shift[1]:5 + shift[1]] = block

    before = aggregate(_field(base), KERNEL).values
    after = aggregate(_field(moved), KERNEL).values
    height, width = before.shape
    np.testing.assert_array_equal(after[shift[0]:, shift[1]:], before[:height - shift[0], :width - shift[1]])
    assert after.sum() == pytest.approx(before.sum())


@pytest.mark.slow
def test_aggregate_outpaces_literal_sum():
    field = _field(random_distributions(np.random.default_rng(2), (64, 64), GRID.num_classes), grid=GRID)
    start = time.perf_counter()
    aggregate(field, DEFAULT_KERNEL)
    fast = time.perf_counter() - start
    start = time.perf_counter()
    naive_aggregate(field, DEFAULT_KERNEL)
    slow = time.perf_counter() - start
    assert slow >= 10.0 * fast


def test_person_mask_picks_the_masked_blob():
    rows, cols = np.indices((21, 41), dtype=np.float64)
    blobs = np.exp(-((rows - 10) ** 2 + (cols - 10) ** 2) / 8.0) + np.exp(-((rows - 10) ** 2 + (cols - 30) ** 2) / 8.0)
    heatmap = Heatmap(keypoint_id=0, values=blobs, offset=(0, 0), stride=4)
    assert heatmap.argmax() == (10, 10)
    masked = apply_person_mask(heatmap, (10.0, 30.0), 5.0)
    assert masked.argmax() == (10, 30)
    assert apply_person_mask(Heatmap(0, np.zeros((5, 5))), (2.0, 2.0), 3.0).total() == 0.0
