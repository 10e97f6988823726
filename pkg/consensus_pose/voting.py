"""
Vote aggregation: every voter cell spreads its class distribution over the
cells of the corresponding log-polar bins, and the spread votes are summed into
one heatmap per keypoint.
"""
import math
from typing import Tuple

import numpy as np

from .exceptions import GridError, ShapeError
from .models import Heatmap, VoteKernel, VoterField


def _check_classes(field: VoterField, kernel: VoteKernel):
    if field.num_classes != kernel.channels:
        raise ShapeError(
            f"voter field has {field.num_classes} classes but the kernel has {kernel.channels} channels"
        )


def _empty_heatmap(field: VoterField, kernel: VoteKernel) -> Heatmap:
    half_h, half_w = kernel.half
    height, width = field.shape
    values = np.zeros((height + kernel.height - 1, width + kernel.width - 1))
    return Heatmap(keypoint_id=field.keypoint_id, values=values, offset=(-half_h, -half_w), stride=field.stride)


def single_vote(field: VoterField, y: Tuple[int, int], kernel: VoteKernel) -> Heatmap:
    """Spread of the single voter at cell y, placed in the aggregate heatmap frame."""
    _check_classes(field, kernel)
    row, col = y
    height, width = field.shape
    if not (0 <= row < height and 0 <= col < width):
        raise ShapeError(f"voter {y} outside a {height}x{width} field")

    heatmap = _empty_heatmap(field, kernel)
    distribution = field.values[row, col].astype(np.float64)
    spread = kernel.weights @ distribution
    heatmap.values[row:row + kernel.height, col:col + kernel.width] += spread
    return heatmap


def aggregate(field: VoterField, kernel: VoteKernel) -> Heatmap:
    """
    Transposed convolution of the field with the kernel: one shifted add of a
    class plane per kernel cell with weight in that class. A fine kernel cell
    belongs to exactly one channel, so that is one add per kernel cell.
    """
    _check_classes(field, kernel)
    heatmap = _empty_heatmap(field, kernel)
    height, width = field.shape
    values = field.values.astype(np.float64)
    background = kernel.grid.background_class

    for cls in range(kernel.channels):
        plane = values[:, :, cls]
        if cls == background or not plane.any():
            continue
        weights = kernel.weights[:, :, cls]
        for u_r, u_c in zip(*np.nonzero(weights)):
            heatmap.values[u_r:u_r + height, u_c:u_c + width] += weights[u_r, u_c] * plane
    return heatmap


def naive_aggregate(field: VoterField, kernel: VoteKernel) -> Heatmap:
    """Literal sum over voters, classes and bin cells; used to check aggregate()."""
    _check_classes(field, kernel)
    heatmap = _empty_heatmap(field, kernel)
    height, width = field.shape
    background = kernel.grid.background_class
    cells = [list(zip(*np.nonzero(kernel.weights[:, :, cls]))) for cls in range(kernel.channels)]

    for y_r in range(height):
        for y_c in range(width):
            for cls in range(kernel.channels):
                if cls == background:
                    continue
                probability = float(field.values[y_r, y_c, cls])
                for u_r, u_c in cells[cls]:
                    heatmap.values[y_r + u_r, y_c + u_c] += probability * float(kernel.weights[u_r, u_c, cls])
    return heatmap


def person_mask(shape: Tuple[int, int], center: Tuple[float, float], sigma: float) -> np.ndarray:
    if math.isinf(sigma):
        return np.ones(shape)
    rows, cols = np.indices(shape, dtype=np.float64)
    d2 = (rows - center[0]) ** 2 + (cols - center[1]) ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def apply_person_mask(heatmap: Heatmap, center: Tuple[float, float], scale: float, sigma_factor: float = 1.0) -> Heatmap:
    """
    Multiply by an isotropic Gaussian centered on `center` (heatmap cells) with
    sigma = sigma_factor * scale cells. An infinite scale is the identity mask.
    """
    if not scale > 0:
        raise GridError(f"person scale must be positive, got {scale}")
    height, width = heatmap.shape
    if not (0 <= center[0] < height and 0 <= center[1] < width):
        raise ShapeError(f"mask center {center} outside a {height}x{width} heatmap")
    mask = person_mask(heatmap.shape, center, sigma_factor * scale)
    return Heatmap(
        keypoint_id=heatmap.keypoint_id,
        values=heatmap.values * mask,
        offset=heatmap.offset,
        stride=heatmap.stride,
    )


def pool_heatmap(heatmap: Heatmap, field_shape: Tuple[int, int], pool: int) -> Heatmap:
    """
    Crop an aggregated heatmap to the voter-field extent and sum-pool it by
    `pool` cells per side, giving a heatmap over the coarse image grid. Trailing
    cells of a field not divisible by `pool` pool into a partial last cell.
    """
    top, left = -heatmap.offset[0], -heatmap.offset[1]
    height, width = field_shape
    crop = heatmap.values[top:top + height, left:left + width]
    coarse_h, coarse_w = -(-height // pool), -(-width // pool)
    padded = np.zeros((coarse_h * pool, coarse_w * pool))
    padded[:height, :width] = crop
    pooled = padded.reshape(coarse_h, pool, coarse_w, pool).sum(axis=(1, 3))
    return Heatmap(keypoint_id=heatmap.keypoint_id, values=pooled, offset=(0, 0), stride=heatmap.stride * pool)
