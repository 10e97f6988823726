"""
Consensus voting: the joint distribution of two keypoints' locations, where a
pair of locations only gets mass from voters that support both of them.
Computed on the coarse grid with the first rings only.
"""
from typing import Tuple

import numpy as np

from .exceptions import GridError, NoEvidenceError, ShapeError
from .geometry import coarse_grid, rescale_grid
from .models import CoarseField, Heatmap, JointTable, VoteKernel, VoterField


def coarse_project(field: VoterField, factor: int, kept_rings: int) -> CoarseField:
    """
    Fold classes beyond `kept_rings` into background, then sum-pool voters
    into coarse cells of `factor` pixels and renormalize every cell. A field not
    divisible by the pooling size is padded with background voters.
    """
    if factor <= 0 or factor % field.stride != 0:
        raise GridError(f"coarse factor {factor} is not a positive multiple of the stride {field.stride}")
    pool = factor // field.stride
    truncated = coarse_grid(field.grid, kept_rings)
    kept = truncated.num_classes - 1

    values = field.values.astype(np.float64)
    folded = np.empty(values.shape[:2] + (truncated.num_classes,))
    folded[:, :, :kept] = values[:, :, :kept]
    folded[:, :, kept] = values[:, :, kept:].sum(axis=2)

    height, width = field.shape
    coarse_h, coarse_w = -(-height // pool), -(-width // pool)
    padded = np.zeros((coarse_h * pool, coarse_w * pool, truncated.num_classes))
    padded[:, :, truncated.background_class] = 1.0
    padded[:height, :width] = folded
    pooled = padded.reshape(coarse_h, pool, coarse_w, pool, -1).sum(axis=(1, 3))
    pooled /= pooled.sum(axis=2, keepdims=True)

    return CoarseField(
        keypoint_id=field.keypoint_id,
        values=pooled,
        factor=factor,
        grid=rescale_grid(truncated, pool),
        source_grid=field.grid,
    )


def _check_pair(field_i: CoarseField, field_j: CoarseField, kernel: VoteKernel):
    if field_i.shape != field_j.shape or field_i.factor != field_j.factor:
        raise ShapeError(
            f"coarse grids differ: {field_i.shape}@{field_i.factor}px vs {field_j.shape}@{field_j.factor}px"
        )
    for field in (field_i, field_j):
        if field.values.shape[2] != kernel.channels:
            raise ShapeError(
                f"coarse field {field.keypoint_id} has {field.values.shape[2]} classes, "
                f"kernel has {kernel.channels}"
            )


def _weighted_planes(field: CoarseField, kernel: VoteKernel) -> np.ndarray:
    """planes[y_r, y_c, u_r, u_c]: mass voter y sends to kernel cell u."""
    return np.einsum("hwc,klc->hwkl", field.values, kernel.weights)


def _in_grid_mass(planes: np.ndarray, kernel: VoteKernel) -> np.ndarray:
    """Vote mass of every voter that lands inside the coarse grid."""
    height, width = planes.shape[:2]
    half_h, half_w = kernel.half
    mass = np.zeros((height, width))
    for u_r in range(kernel.height):
        r0, r1 = max(0, half_h - u_r), min(height, height + half_h - u_r)
        for u_c in range(kernel.width):
            c0, c1 = max(0, half_w - u_c), min(width, width + half_w - u_c)
            if r0 < r1 and c0 < c1:
                mass[r0:r1, c0:c1] += planes[r0:r1, c0:c1, u_r, u_c]
    return mass


def joint_table(field_i: CoarseField, field_j: CoarseField, kernel: VoteKernel) -> JointTable:
    """
    P(K_i = x_i, K_j = x_j) proportional to sum_y P_y(K_i = x_i) P_y(K_j = x_j).

    For a fixed kernel cell u of the first vote, the contribution of all voters
    is a shifted outer product of one weighted class plane with the full spread
    of the second keypoint, so the table is a sum of kernel-many shifted adds
    (the convolution form of the voter sum). Both locations are restricted to
    the coarse grid and the table is normalized to sum 1.
    """
    _check_pair(field_i, field_j, kernel)
    height, width = field_i.shape
    k_h, k_w = kernel.height, kernel.width
    half_h, half_w = kernel.half
    reach = max(k_h, k_w) - 1
    span = 2 * reach + 1

    planes_i = _weighted_planes(field_i, kernel)
    planes_j = _weighted_planes(field_j, kernel)

    full = np.zeros((height + k_h - 1, width + k_w - 1, span, span))
    for u_r, u_c in zip(*np.nonzero(kernel.weights.any(axis=2))):
        first = planes_i[:, :, u_r, u_c]
        if not first.any():
            continue
        full[u_r:u_r + height, u_c:u_c + width, reach - u_r:reach - u_r + k_h, reach - u_c:reach - u_c + k_w] += (
            first[:, :, None, None] * planes_j
        )

    values = full[half_h:half_h + height, half_w:half_w + width].copy()
    rows, cols = np.indices((height, width))
    d_r = np.arange(span) - reach
    target_r = rows[:, :, None] + d_r[None, None, :]
    target_c = cols[:, :, None] + d_r[None, None, :]
    inside_r = (target_r >= 0) & (target_r < height)
    inside_c = (target_c >= 0) & (target_c < width)
    values *= inside_r[:, :, :, None] & inside_c[:, :, None, :]

    total = float(np.sum(_in_grid_mass(planes_i, kernel) * _in_grid_mass(planes_j, kernel)))
    if total <= 0:
        raise NoEvidenceError(
            f"keypoints {field_i.keypoint_id} and {field_j.keypoint_id} share no voters inside the grid"
        )
    return JointTable(
        pair=(field_i.keypoint_id, field_j.keypoint_id),
        values=values / total,
        reach=reach,
        factor=field_i.factor,
        normalization=total,
    )


def naive_joint(field_i: CoarseField, field_j: CoarseField, kernel: VoteKernel) -> JointTable:
    """Literal loop over (x_i, x_j, y); for checking joint_table on small grids."""
    _check_pair(field_i, field_j, kernel)
    height, width = field_i.shape
    half_h, half_w = kernel.half
    cells = [(r, c) for r in range(height) for c in range(width)]

    def vote(field, y, x):
        u_r, u_c = x[0] - y[0] + half_h, x[1] - y[1] + half_w
        if not (0 <= u_r < kernel.height and 0 <= u_c < kernel.width):
            return 0.0
        return float(field.values[y[0], y[1]] @ kernel.weights[u_r, u_c])

    dense = np.zeros((height, width, height, width))
    for x_i in cells:
        for x_j in cells:
            total = 0.0
            for y in cells:
                total += vote(field_i, y, x_i) * vote(field_j, y, x_j)
            dense[x_i[0], x_i[1], x_j[0], x_j[1]] = total

    normalization = float(dense.sum())
    if normalization <= 0:
        raise NoEvidenceError(
            f"keypoints {field_i.keypoint_id} and {field_j.keypoint_id} share no voters inside the grid"
        )
    reach = max(kernel.height, kernel.width) - 1
    return JointTable.from_dense(
        pair=(field_i.keypoint_id, field_j.keypoint_id),
        dense=dense / normalization,
        reach=reach,
        factor=field_i.factor,
        normalization=normalization,
    )


def conditional(joint: JointTable, x_j: Tuple[int, int]) -> Heatmap:
    """P(K_i = . | K_j = x_j) over the coarse grid."""
    height, width = joint.grid_shape
    if not (0 <= x_j[0] < height and 0 <= x_j[1] < width):
        raise ShapeError(f"conditioning cell {x_j} outside the {height}x{width} grid")
    cells = np.stack(np.indices((height, width)), axis=-1).reshape(-1, 2)
    column = joint.lookup(cells, np.array([x_j]))[:, 0].reshape(height, width)
    mass = float(column.sum())
    if mass <= 0:
        raise NoEvidenceError(f"no joint mass at conditioning location {tuple(x_j)}")
    return Heatmap(keypoint_id=joint.pair[0], values=column / mass, offset=(0, 0), stride=joint.factor)


def marginal(joint: JointTable) -> np.ndarray:
    """Consensus-weighted marginal of K_i: the joint summed over x_j."""
    return joint.values.sum(axis=(2, 3))
