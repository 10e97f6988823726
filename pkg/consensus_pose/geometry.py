"""
Log-polar class partition of relative displacements and the fixed kernel that
spreads a class vote back over the cells of its bin.
"""
import math
from typing import Tuple

import numpy as np
from cachetools import LRUCache, cached

from .exceptions import GridError
from .models import LogPolarGrid, VoteKernel

# Keeps sector assignment stable for angles that land on a sector boundary up to
# floating point noise; such angles go to the counter-clockwise sector.
ANGLE_SLACK = 1e-9


def bin_classes(dy, dx, grid: LogPolarGrid) -> np.ndarray:
    """Vectorized bin_of over arrays of integer cell offsets."""
    dy = np.asarray(dy, dtype=np.float64)
    dx = np.asarray(dx, dtype=np.float64)
    r2 = dy * dy + dx * dx
    bounds2 = np.square(np.asarray(grid.ring_boundaries))

    ring = np.searchsorted(bounds2, r2, side="right") - 1
    ring = np.clip(ring, 0, grid.num_rings - 1)

    width = 2 * math.pi / grid.angular_bins
    theta = np.mod(np.arctan2(-dy, dx) - grid.angular_offset, 2 * math.pi)
    sector = np.floor(theta / width + ANGLE_SLACK).astype(np.int64) % grid.angular_bins

    classes = 1 + ring * grid.angular_bins + sector
    classes = np.where(r2 < bounds2[0], grid.center_class, classes)
    classes = np.where(r2 >= bounds2[-1], grid.background_class, classes)
    return classes.astype(np.int64)


def bin_of(displacement: Tuple[int, int], grid: LogPolarGrid) -> int:
    """Class of the integer cell offset (dy, dx); rows grow downwards."""
    dy, dx = displacement
    return int(bin_classes(dy, dx, grid))


def offset_class_map(grid: LogPolarGrid, height: int, width: int) -> np.ndarray:
    """Class of every cell of a (height, width) window centered on the origin."""
    half_h, half_w = (height - 1) // 2, (width - 1) // 2
    dy, dx = np.mgrid[-half_h:half_h + 1, -half_w:half_w + 1]
    return bin_classes(dy, dx, grid)


@cached(cache=LRUCache(maxsize=32))
def build_kernel(grid: LogPolarGrid, height: int = 65, width: int = 65) -> VoteKernel:
    if height % 2 == 0 or width % 2 == 0:
        raise GridError(f"kernel dimensions must be odd, got {height}x{width}")
    if min((height - 1) // 2, (width - 1) // 2) < grid.outer_radius:
        raise GridError(
            f"kernel {height}x{width} cannot contain the outer ring of radius {grid.outer_radius}"
        )

    class_map = offset_class_map(grid, height, width)
    bin_sizes = np.bincount(class_map.ravel(), minlength=grid.num_classes)

    weights = np.zeros((height, width, grid.num_classes))
    rows, cols = np.indices(class_map.shape)
    populated = class_map != grid.background_class
    cell_classes = class_map[populated]
    weights[rows[populated], cols[populated], cell_classes] = 1.0 / bin_sizes[cell_classes]

    for array in (weights, class_map, bin_sizes):
        array.flags.writeable = False
    return VoteKernel(grid=grid, weights=weights, class_map=class_map, bin_sizes=bin_sizes)


def coarse_grid(grid: LogPolarGrid, keep_rings: int) -> LogPolarGrid:
    if keep_rings < 1:
        raise GridError("keep_rings must be at least 1")
    if keep_rings > grid.num_rings:
        raise GridError(f"cannot keep {keep_rings} rings of a {grid.num_rings}-ring grid")
    return LogPolarGrid(
        num_rings=keep_rings,
        angular_bins=grid.angular_bins,
        ring_boundaries=grid.ring_boundaries[:keep_rings + 1],
        angular_offset=grid.angular_offset,
    )


def truncation_map(grid: LogPolarGrid, keep_rings: int) -> np.ndarray:
    """For every class of `grid`, its class in coarse_grid(grid, keep_rings)."""
    truncated = coarse_grid(grid, keep_rings)
    mapping = np.arange(grid.num_classes)
    mapping[mapping >= truncated.background_class] = truncated.background_class
    return mapping


def round_half_away(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def rescale_grid(grid: LogPolarGrid, divisor: float) -> LogPolarGrid:
    """
    Grid with radii divided by `divisor`, rounded half away from zero. A radius
    that would not exceed its inner neighbor after rounding is bumped to
    neighbor + 1 so the rings stay strictly increasing.
    """
    radii = []
    for radius in round_half_away(np.asarray(grid.ring_boundaries) / divisor):
        floor = radii[-1] + 1 if radii else 1
        radii.append(max(float(radius), floor))
    return LogPolarGrid(
        num_rings=grid.num_rings,
        angular_bins=grid.angular_bins,
        ring_boundaries=tuple(radii),
        angular_offset=grid.angular_offset,
    )


def kernel_size_for(grid: LogPolarGrid) -> int:
    """Smallest odd kernel side that contains the outer ring."""
    return 2 * int(math.ceil(grid.outer_radius)) + 1


def pool_kernel(kernel: VoteKernel, pool: int, grid: LogPolarGrid) -> VoteKernel:
    """
    Kernel seen by voters sum-pooled in pool x pool blocks. A voter at offset a
    inside its block that sends weight w to fine kernel cell u lands in coarse
    cell floor((a + u) / pool); averaging over a keeps the mass of every class.
    The result is soft: a coarse cell may carry weight in several channels.
    """
    if pool < 1:
        raise GridError(f"pooling size must be positive, got {pool}")
    if grid.num_classes != kernel.channels:
        raise GridError(f"grid has {grid.num_classes} classes but the kernel has {kernel.channels} channels")

    half_h, half_w = kernel.half
    u_r, u_c, classes = np.nonzero(kernel.weights)
    mass = kernel.weights[u_r, u_c, classes] / (pool * pool)
    a_r, a_c = np.divmod(np.arange(pool * pool), pool)
    d_r = (a_r[:, None] + u_r[None, :] - half_h) // pool
    d_c = (a_c[:, None] + u_c[None, :] - half_w) // pool
    reach_h = int(np.abs(d_r).max())
    reach_w = int(np.abs(d_c).max())

    weights = np.zeros((2 * reach_h + 1, 2 * reach_w + 1, kernel.channels))
    np.add.at(
        weights,
        (d_r + reach_h, d_c + reach_w, np.broadcast_to(classes, d_r.shape)),
        np.broadcast_to(mass, d_r.shape),
    )

    # dominant channel per cell
    class_map = np.where(weights.any(axis=2), weights.argmax(axis=2), grid.background_class)
    bin_sizes = (weights > 0).sum(axis=(0, 1))
    for array in (weights, class_map, bin_sizes):
        array.flags.writeable = False
    return VoteKernel(grid=grid, weights=weights, class_map=class_map, bin_sizes=bin_sizes)


@cached(cache=LRUCache(maxsize=8))
def coarse_kernel(grid: LogPolarGrid, stride: int, coarse_factor: int, keep_rings: int) -> VoteKernel:
    """
    Kernel for coarse fields: the fine kernel of the truncated grid pooled by
    coarse_factor / stride. Its grid carries the radii in coarse cells.
    """
    if coarse_factor <= 0 or coarse_factor % stride != 0:
        raise GridError(f"coarse factor {coarse_factor} is not a positive multiple of the stride {stride}")
    pool = coarse_factor // stride
    truncated = coarse_grid(grid, keep_rings)
    size = kernel_size_for(truncated)
    return pool_kernel(build_kernel(truncated, size, size), pool, rescale_grid(truncated, pool))
