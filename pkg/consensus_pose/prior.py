"""
Image-independent binary term: a smoothed histogram of coarse displacements
between two keypoints, gathered from annotated poses.
"""
from typing import Iterable, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .exceptions import GridError, NoEvidenceError
from .geometry import round_half_away
from .models import Annotation, PriorTable, Skeleton
from .skeleton import augment_keypoints, default_skeleton


def _finish(hist: np.ndarray, sigma: float, floor: float) -> np.ndarray:
    if sigma > 0:
        hist = gaussian_filter(hist, sigma=sigma, mode="constant")
    hist = hist / hist.sum()
    # mix in a uniform floor: every entry >= floor and the table still sums to 1
    return (1.0 - hist.size * floor) * hist + floor


def _check(radius: int, floor: float):
    if radius < 0:
        raise GridError(f"prior radius must be non-negative, got {radius}")
    if not 0 <= floor * (2 * radius + 1) ** 2 < 1:
        raise GridError(f"prior floor {floor} too large for a {2 * radius + 1}-cell wide table")


def fit_prior(
    annotations: Iterable[Annotation],
    pair: Tuple[int, int],
    factor: int,
    radius: int = 8,
    sigma: float = 1.0,
    floor: float = 1e-6,
    skeleton: Skeleton = None,
) -> PriorTable:
    """
    Histogram of round((x_j - x_i) / factor) over every annotation where both
    keypoints are labeled; displacements past `radius` are clamped to the
    border bins and counted in `clamped`.
    """
    _check(radius, floor)
    skeleton = skeleton or default_skeleton()
    i, j = pair
    hist = np.zeros((2 * radius + 1, 2 * radius + 1))
    samples = clamped = 0
    for annotation in annotations:
        points, _ = augment_keypoints(annotation.points, annotation.visible, skeleton)
        if np.isnan(points[i]).any() or np.isnan(points[j]).any():
            continue
        delta = round_half_away((points[j] - points[i]) / factor).astype(np.int64)
        if np.any(np.abs(delta) > radius):
            clamped += 1
        delta = np.clip(delta, -radius, radius) + radius
        hist[delta[0], delta[1]] += 1.0
        samples += 1

    if samples == 0:
        raise NoEvidenceError(f"no annotation labels both keypoints of pair {pair}")
    return PriorTable(
        pair=(i, j),
        values=_finish(hist, sigma, floor),
        radius=radius,
        factor=factor,
        sigma=sigma,
        floor=floor,
        samples=samples,
        clamped=clamped,
    )


def uniform_prior(pair: Tuple[int, int], factor: int, radius: int = 8) -> PriorTable:
    size = 2 * radius + 1
    return PriorTable(
        pair=tuple(pair),
        values=np.full((size, size), 1.0 / (size * size)),
        radius=radius,
        factor=factor,
        sigma=0.0,
        floor=0.0,
    )


def prior_score(table: PriorTable, x_i, x_j) -> float:
    delta = np.asarray(x_j, dtype=np.int64) - np.asarray(x_i, dtype=np.int64)
    return float(table.score(delta))


def prior_scores(table: PriorTable, cells_i: np.ndarray, cells_j: np.ndarray) -> np.ndarray:
    """Scores of every (cells_i[a], cells_j[b]) pair, shape (len(cells_i), len(cells_j))."""
    cells_i = np.asarray(cells_i, dtype=np.int64).reshape(-1, 2)
    cells_j = np.asarray(cells_j, dtype=np.int64).reshape(-1, 2)
    return table.score(cells_j[None, :, :] - cells_i[:, None, :])
