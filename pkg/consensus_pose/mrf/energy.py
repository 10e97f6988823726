"""
Cost tables of the pose energy: unaries from keypoint heatmaps, binaries that
mix consensus joints with the location prior, and the folding of synthetic
keypoints into the edge between their parents.
"""
from typing import Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ConfigError, NoEvidenceError, ShapeError
from ..geometry import round_half_away
from ..models import JointTable, PriorTable

EPSILON = 1e-8


def grid_cells(grid_shape: Tuple[int, int]) -> np.ndarray:
    """Every cell of the grid in scanline order, shape (H * W, 2)."""
    return np.stack(np.indices(grid_shape), axis=-1).reshape(-1, 2)


def prune_labels(values: np.ndarray, k: int) -> np.ndarray:
    """
    The k cells with the highest evidence, ties broken by scanline position,
    returned in scanline order. k <= 0 or k >= number of cells keeps every cell.
    """
    flat = np.asarray(values, dtype=np.float64).ravel()
    if 0 < k < flat.size:
        keep = np.sort(np.argsort(-flat, kind="stable")[:k])
    else:
        keep = np.arange(flat.size)
    return np.stack(np.unravel_index(keep, values.shape), axis=-1)


def build_unary(values: np.ndarray, label_space: np.ndarray, eps: float = EPSILON) -> np.ndarray:
    """-log of the heatmap restricted to the label space, normalized and floored at eps."""
    label_space = np.asarray(label_space, dtype=np.int64).reshape(-1, 2)
    height, width = values.shape
    if np.any(label_space < 0) or np.any(label_space[:, 0] >= height) or np.any(label_space[:, 1] >= width):
        raise ShapeError(f"label space leaves the {height}x{width} heatmap")
    restricted = np.asarray(values, dtype=np.float64)[label_space[:, 0], label_space[:, 1]]
    mass = restricted.sum()
    if not mass > 0:
        raise NoEvidenceError("heatmap has no mass over the label space")
    return -np.log(np.maximum(restricted / mass, eps))


def _check_lambda(lam: float):
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("lambda", f"must lie in [0, 1], got {lam}")


def pair_cost(
    joint: JointTable,
    prior: Optional[PriorTable],
    lam: float,
    cells_i: np.ndarray,
    cells_j: np.ndarray,
    eps: float = EPSILON,
) -> np.ndarray:
    """Elementwise binary cost for broadcastable (..., 2) cell arrays."""
    _check_lambda(lam)
    cells_i = np.asarray(cells_i, dtype=np.int64)
    cells_j = np.asarray(cells_j, dtype=np.int64)
    cost = 0.0
    if lam > 0:
        cost = lam * -np.log(np.maximum(joint.at(cells_i, cells_j), eps))
    if lam < 1:
        if prior is None:
            raise ShapeError(f"pair {joint.pair} needs a prior when lambda < 1")
        if prior.factor != joint.factor:
            raise ShapeError(f"prior at {prior.factor}px does not match joint at {joint.factor}px")
        cost = cost + (1.0 - lam) * -np.log(prior.score(cells_j - cells_i))
    return np.broadcast_to(cost, np.broadcast_shapes(cells_i.shape, cells_j.shape)[:-1]).astype(np.float64)


def build_binary(
    joint: JointTable,
    prior: Optional[PriorTable],
    lam: float,
    labels_i: np.ndarray,
    labels_j: np.ndarray,
    eps: float = EPSILON,
) -> np.ndarray:
    """
    phi(x_i, x_j) = lam * -log(max(joint, eps)) + (1 - lam) * -log(prior) for
    every label pair, shape (len(labels_i), len(labels_j)). lam = 1 ignores the
    prior entirely.
    """
    labels_i = np.asarray(labels_i, dtype=np.int64).reshape(-1, 2)
    labels_j = np.asarray(labels_j, dtype=np.int64).reshape(-1, 2)
    return pair_cost(joint, prior, lam, labels_i[:, None, :], labels_j[None, :, :], eps)


def synthetic_cells(labels_i: np.ndarray, labels_j: np.ndarray, a: float, b: float) -> np.ndarray:
    """round(a * x_i + b * x_j) per coordinate, half away from zero; shape (Li, Lj, 2)."""
    labels_i = np.asarray(labels_i, dtype=np.float64).reshape(-1, 2)
    labels_j = np.asarray(labels_j, dtype=np.float64).reshape(-1, 2)
    return round_half_away(a * labels_i[:, None, :] + b * labels_j[None, :, :]).astype(np.int64)


def fold_synthetic(
    phi_s: np.ndarray,
    links: Sequence[Tuple[str, np.ndarray]],
    a: float,
    b: float,
    labels_i: np.ndarray,
    labels_j: np.ndarray,
    grid_shape: Tuple[int, int],
    eps: float = EPSILON,
) -> np.ndarray:
    """
    Eliminate a synthetic keypoint s = round(a * x_i + b * x_j) from the energy.

    phi_s is its unary over the whole grid (scanline order). Each link is
    ("i", table[x_i, s]) or ("j", table[s, x_j]) with s indexed over the whole
    grid. The result is the (Li, Lj) cost of the edge (i, j); every term whose
    synthetic location falls off the grid costs -log(eps).
    """
    height, width = grid_shape
    phi_s = np.asarray(phi_s, dtype=np.float64).ravel()
    if phi_s.size != height * width:
        raise ShapeError(f"synthetic unary has {phi_s.size} entries for a {height}x{width} grid")

    cells = synthetic_cells(labels_i, labels_j, a, b)
    inside = (cells[..., 0] >= 0) & (cells[..., 0] < height) & (cells[..., 1] >= 0) & (cells[..., 1] < width)
    flat = np.where(inside, cells[..., 0] * width + cells[..., 1], 0)
    penalty = -np.log(eps)
    num_i, num_j = flat.shape

    folded = np.where(inside, phi_s[flat], penalty)
    for role, table in links:
        if role == "i":
            if table.shape != (num_i, height * width):
                raise ShapeError(f"link table {table.shape} does not match ({num_i}, {height * width})")
            term = table[np.arange(num_i)[:, None], flat]
        elif role == "j":
            if table.shape != (height * width, num_j):
                raise ShapeError(f"link table {table.shape} does not match ({height * width}, {num_j})")
            term = table[flat, np.arange(num_j)[None, :]]
        else:
            raise ValueError(f"unknown link role {role!r}")
        folded = folded + np.where(inside, term, penalty)
    return folded


def fold_midpoint(
    phi_l: np.ndarray,
    phi_il: np.ndarray,
    phi_lj: np.ndarray,
    labels_i: np.ndarray,
    labels_j: np.ndarray,
    grid_shape: Tuple[int, int],
    eps: float = EPSILON,
) -> np.ndarray:
    """
    phi~(x_i, x_j) = phi_l(m) + phi_il(x_i, m) + phi_lj(m, x_j) with
    m = round((x_i + x_j) / 2). The unaries of i and j stay on their nodes.
    """
    return fold_synthetic(phi_l, [("i", phi_il), ("j", phi_lj)], 0.5, 0.5, labels_i, labels_j, grid_shape, eps)


def link_role(link: Tuple[int, int], edge: Tuple[int, int], synthetic: int) -> str:
    """Role of a fold link relative to the edge: "i" for (i, s), "j" for (s, j) or (j, s)."""
    first, second = link
    if first == edge[0] and second == synthetic:
        return "i"
    if (first == synthetic and second == edge[1]) or (first == edge[1] and second == synthetic):
        return "j"
    raise ShapeError(f"link {link} does not connect synthetic {synthetic} to edge {edge}")
