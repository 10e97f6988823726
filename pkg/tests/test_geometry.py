import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from consensus_pose.exceptions import GridError
from consensus_pose.geometry import (
    bin_classes,
    bin_of,
    build_kernel,
    coarse_grid,
    coarse_kernel,
    kernel_size_for,
    offset_class_map,
    pool_kernel,
    rescale_grid,
    round_half_away,
    truncation_map,
)
from consensus_pose.models import LogPolarGrid

GRID = LogPolarGrid()


def test_default_grid_layout():
    assert GRID.num_classes == 50
    assert GRID.center_class == 0
    assert GRID.background_class == 49
    assert GRID.ring_class(1, 0) == 13
    assert GRID.ring_and_sector(13) == (1, 0)
    with pytest.raises(GridError):
        GRID.ring_and_sector(GRID.background_class)


@pytest.mark.parametrize(
    "boundaries,rings",
    [((2.0, 5.0), 2), ((2.0, 2.0, 5.0), 2), ((0.0, 1.0, 2.0), 2), ((3.0, 2.0, 5.0), 2)],
)
def test_invalid_grids(boundaries, rings):
    with pytest.raises(GridError):
        LogPolarGrid(num_rings=rings, angular_bins=4, ring_boundaries=boundaries)


@pytest.mark.parametrize(
    "displacement,expected",
    [
        ((0, 0), 0),
        ((1, 1), 0),
        ((0, 2), 1),  # inner boundary belongs to the first ring
        ((0, 3), 1),  # east
        ((-3, 0), 4),  # up is counter-clockwise from east
        ((0, -3), 7),
        ((3, 0), 10),
        ((0, 5), 13),
        ((0, 31), 37),
        ((0, 32), 49),
        ((40, -40), 49),
    ],
)
def test_bin_of(displacement, expected):
    assert bin_of(displacement, GRID) == expected


def test_angular_offset_rotates_sectors():
    rotated = LogPolarGrid(angular_offset=math.pi / 12)
    # 0 radians now sits half a sector before sector 0
    assert bin_of((0, 3), rotated) == 1 + 11
    assert bin_of((-1, 3), rotated) == 1


@given(st.integers(-40, 40), st.integers(-40, 40))
def test_bin_classes_matches_radius(dy, dx):
    cls = int(bin_classes(dy, dx, GRID))
    radius = math.hypot(dy, dx)
    assert 0 <= cls < GRID.num_classes
    assert (cls == GRID.center_class) == (radius < 2.0)
    assert (cls == GRID.background_class) == (radius >= 32.0)
    if cls not in (GRID.center_class, GRID.background_class):
        ring, _ = GRID.ring_and_sector(cls)
        assert GRID.ring_boundaries[ring] <= radius < GRID.ring_boundaries[ring + 1]


def test_offset_class_map_is_centered():
    classes = offset_class_map(GRID, 65, 65)
    assert classes.shape == (65, 65)
    assert classes[32, 32] == GRID.center_class
    assert classes[32, 35] == bin_of((0, 3), GRID)
    assert classes[0, 0] == GRID.background_class


def test_kernel_weights_average_each_bin():
    kernel = build_kernel(GRID, 65, 65)
    per_class = kernel.weights.sum(axis=(0, 1))
    populated = kernel.bin_sizes[: GRID.background_class] > 0
    np.testing.assert_allclose(per_class[: GRID.background_class][populated], 1.0)
    assert per_class[GRID.background_class] == 0.0
    channels = (kernel.weights > 0).sum(axis=2)
    dy, dx = np.mgrid[-32:33, -32:33]
    inside = dy * dy + dx * dx < GRID.outer_radius**2
    assert np.all(channels[inside] == 1)
    assert np.all(channels[~inside] == 0)


def test_kernel_is_cached_and_read_only():
    kernel = build_kernel(GRID, 65, 65)
    assert build_kernel(GRID, 65, 65) is kernel
    with pytest.raises(ValueError):
        kernel.weights[0, 0, 0] = 1.0


@pytest.mark.parametrize("size", [64, 63])
def test_kernel_size_checks(size):
    with pytest.raises(GridError):
        build_kernel(GRID, size, size)


def test_coarse_grid_and_truncation():
    truncated = coarse_grid(GRID, 2)
    assert truncated.ring_boundaries == (2.0, 5.0, 11.0)
    assert truncated.num_classes == 26
    mapping = truncation_map(GRID, 2)
    np.testing.assert_array_equal(mapping[:25], np.arange(25))
    assert np.all(mapping[25:] == 25)
    with pytest.raises(GridError):
        coarse_grid(GRID, 0)
    with pytest.raises(GridError):
        coarse_grid(GRID, 5)


def test_round_half_away():
    np.testing.assert_array_equal(round_half_away([-1.5, -0.5, 0.5, 1.5, 2.4]), [-2.0, -1.0, 1.0, 2.0, 2.0])


def test_rescale_keeps_rings_increasing():
    grid = LogPolarGrid(num_rings=2, angular_bins=4, ring_boundaries=(1.0, 2.0, 3.0))
    assert rescale_grid(grid, 3).ring_boundaries == (1.0, 2.0, 3.0)


def test_default_coarse_kernel():
    kernel = coarse_kernel(GRID, stride=4, coarse_factor=12, keep_rings=2)
    assert kernel.grid.ring_boundaries == (1.0, 2.0, 4.0)
    assert kernel_size_for(kernel.grid) == 9
    assert kernel.weights.shape == (9, 9, 26)


def test_coarse_kernel_keeps_every_class():
    kernel = coarse_kernel(GRID, stride=4, coarse_factor=12, keep_rings=2)
    background = kernel.grid.background_class
    per_class = kernel.weights.sum(axis=(0, 1))
    np.testing.assert_allclose(per_class[:background], 1.0)
    assert per_class[background] == 0.0
    assert np.all(kernel.bin_sizes[:background] > 0)
    assert coarse_kernel(GRID, stride=4, coarse_factor=12, keep_rings=2) is kernel
    with pytest.raises(GridError):
        coarse_kernel(GRID, stride=4, coarse_factor=10, keep_rings=2)


def test_pool_kernel_by_hand():
    grid = LogPolarGrid(num_rings=1, angular_bins=4, ring_boundaries=(1.0, 2.0))
    fine = build_kernel(grid, 5, 5)
    pooled = pool_kernel(fine, 2, grid)
    # populated offsets -1..1 plus block positions 0..1, floored by 2: coarse offsets -1..1
    assert pooled.weights.shape == (3, 3, grid.num_classes)
    # the center vote never leaves the voter's block
    assert pooled.weights[1, 1, grid.center_class] == pytest.approx(1.0)
    assert pooled.class_map[1, 1] == grid.center_class
    # the east sector holds (0, 1) and (-1, 1), half a vote each
    east = grid.ring_class(0, 0)
    assert pooled.weights[1, 1, east] == pytest.approx(0.375)
    assert pooled.weights[1, 2, east] == pytest.approx(0.375)
    assert pooled.weights[0, 1, east] == pytest.approx(0.125)
    assert pooled.weights[0, 2, east] == pytest.approx(0.125)
    assert pooled.bin_sizes[east] == 4
    np.testing.assert_allclose(pooled.weights.sum(axis=(0, 1))[:-1], 1.0)


def test_pool_by_one_reproduces_the_kernel():
    fine = build_kernel(GRID, 65, 65)
    pooled = pool_kernel(fine, 1, GRID)
    np.testing.assert_array_equal(pooled.weights, fine.weights[1:-1, 1:-1])
    with pytest.raises(GridError):
        pool_kernel(fine, 0, GRID)
