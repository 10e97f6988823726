from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from ..exceptions import ShapeError
from .grid import LogPolarGrid

DISTRIBUTION_TOLERANCE = 1e-6


@dataclass(eq=False)
class VoterField:
    """
    Per-keypoint grid of per-cell softmax distributions over log-polar classes,
    shape (H', W', num_classes). `stride` is the number of image pixels per cell.
    """

    keypoint_id: int
    values: np.ndarray
    stride: int
    grid: LogPolarGrid
    image_size: Tuple[int, int] = None

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ShapeError(f"voter field must be 3-D, got shape {self.values.shape}")
        if self.values.shape[2] != self.grid.num_classes:
            raise ShapeError(
                f"voter field has {self.values.shape[2]} classes, grid expects {self.grid.num_classes}"
            )
        if self.image_size is None:
            self.image_size = (self.values.shape[0] * self.stride, self.values.shape[1] * self.stride)
        expected = (-(-self.image_size[0] // self.stride), -(-self.image_size[1] // self.stride))
        if self.values.shape[:2] != expected:
            raise ShapeError(
                f"voter field of {self.values.shape[:2]} cells does not match image {self.image_size} "
                f"at stride {self.stride}"
            )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape[0], self.values.shape[1]

    @property
    def num_classes(self) -> int:
        return self.values.shape[2]

    def validate_distributions(self, tolerance: float = DISTRIBUTION_TOLERANCE):
        if np.any(self.values < 0):
            raise ShapeError(f"voter field {self.keypoint_id} has negative probabilities")
        sums = self.values.sum(axis=2, dtype=np.float64)
        worst = float(np.max(np.abs(sums - 1.0))) if sums.size else 0.0
        if worst > tolerance:
            raise ShapeError(f"voter field {self.keypoint_id} cells do not sum to 1 (worst deviation {worst:.3g})")

    def info(self):
        return {
            "keypoint_id": self.keypoint_id,
            "shape": list(self.values.shape),
            "stride": self.stride,
            "image_size": list(self.image_size),
        }


@dataclass(eq=False)
class Heatmap:
    """
    Non-negative map over cells. `offset` is the (row, col) of cell (0, 0) in
    units of `stride` pixels relative to the image origin, so cell (r, c) covers
    the pixels starting at ((r + offset[0]) * stride, (c + offset[1]) * stride).
    """

    keypoint_id: int
    values: np.ndarray
    offset: Tuple[int, int] = (0, 0)
    stride: int = 1

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def total(self) -> float:
        return float(self.values.sum())

    def argmax(self) -> Tuple[int, int]:
        flat = int(np.argmax(self.values))
        return np.unravel_index(flat, self.values.shape)

    def cell_to_pixel(self, row: float, col: float) -> Tuple[float, float]:
        """Pixel position of the center of a cell."""
        return (row + self.offset[0] + 0.5) * self.stride, (col + self.offset[1] + 0.5) * self.stride

    def pixel_to_cell(self, row: float, col: float) -> Tuple[float, float]:
        return row / self.stride - self.offset[0], col / self.stride - self.offset[1]

    def info(self):
        return {
            "keypoint_id": self.keypoint_id,
            "shape": list(self.values.shape),
            "offset": list(self.offset),
            "stride": self.stride,
        }


@dataclass(eq=False)
class CoarseField:
    """
    Voter field pooled to the coarse grid, keeping only the first rings. `grid`
    is the truncated grid with its radii rescaled to coarse cells, `factor` the
    number of image pixels per coarse cell.
    """

    keypoint_id: int
    values: np.ndarray
    factor: int
    grid: LogPolarGrid
    source_grid: LogPolarGrid = field(default=None, repr=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape[0], self.values.shape[1]

    def info(self):
        return {
            "keypoint_id": self.keypoint_id,
            "shape": list(self.values.shape),
            "factor": self.factor,
            "grid": self.grid.info(),
        }


@dataclass(eq=False)
class VoterFieldFile:
    """All voter fields of one image, as stored in a voter-field file."""

    image_size: Tuple[int, int]
    stride: int
    grid: LogPolarGrid
    fields: List[VoterField] = field(default_factory=list)

    def __post_init__(self):
        for voter_field in self.fields:
            if voter_field.grid != self.grid or voter_field.stride != self.stride:
                raise ShapeError(f"field {voter_field.keypoint_id} disagrees with the file grid or stride")
            if tuple(voter_field.image_size) != tuple(self.image_size):
                raise ShapeError(f"field {voter_field.keypoint_id} covers a different image size")

    @property
    def keypoint_ids(self) -> List[int]:
        return [voter_field.keypoint_id for voter_field in self.fields]

    def by_id(self) -> Dict[int, VoterField]:
        return {voter_field.keypoint_id: voter_field for voter_field in self.fields}

    def info(self):
        return {
            "image_size": list(self.image_size),
            "stride": self.stride,
            "grid": self.grid.info(),
            "keypoints": self.keypoint_ids,
        }
