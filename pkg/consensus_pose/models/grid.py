from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..exceptions import GridError


@dataclass(frozen=True)
class LogPolarGrid:
    """
    Log-polar partition of relative displacements, measured in output-grid cells.

    Class layout: 0 is the center disc, 1 + ring * angular_bins + sector are the
    ring classes (ring and sector 0-based) and the last class is background.
    """

    num_rings: int = 4
    angular_bins: int = 12
    ring_boundaries: Tuple[float, ...] = (2.0, 5.0, 11.0, 21.0, 32.0)
    angular_offset: float = 0.0

    def __post_init__(self):
        boundaries = tuple(float(b) for b in self.ring_boundaries)
        object.__setattr__(self, "ring_boundaries", boundaries)
        if self.num_rings < 1:
            raise GridError(f"num_rings must be positive, got {self.num_rings}")
        if self.angular_bins < 1:
            raise GridError(f"angular_bins must be positive, got {self.angular_bins}")
        if len(boundaries) != self.num_rings + 1:
            raise GridError(f"expected {self.num_rings + 1} ring boundaries, got {len(boundaries)}")
        if boundaries[0] <= 0:
            raise GridError("center disc radius must be positive")
        if any(b <= a for a, b in zip(boundaries, boundaries[1:])):
            raise GridError(f"ring boundaries must be strictly increasing: {boundaries}")

    @property
    def num_classes(self) -> int:
        return 2 + self.num_rings * self.angular_bins

    @property
    def center_class(self) -> int:
        return 0

    @property
    def background_class(self) -> int:
        return self.num_classes - 1

    @property
    def outer_radius(self) -> float:
        return self.ring_boundaries[-1]

    def ring_class(self, ring: int, sector: int) -> int:
        return 1 + ring * self.angular_bins + sector

    def ring_and_sector(self, cls: int) -> Tuple[int, int]:
        if cls in (self.center_class, self.background_class):
            raise GridError(f"class {cls} is not a ring class")
        return divmod(cls - 1, self.angular_bins)

    def info(self):
        return {
            "num_rings": self.num_rings,
            "angular_bins": self.angular_bins,
            "ring_boundaries": list(self.ring_boundaries),
            "angular_offset": self.angular_offset,
            "num_classes": self.num_classes,
        }


@dataclass(frozen=True, eq=False)
class VoteKernel:
    """
    Fixed vote-spreading kernel. weights has shape (H_k, W_k, num_classes) and
    every non-background channel sums to 1. class_map holds the class of every
    kernel cell (its displacement from the kernel center; the dominant channel
    for pooled kernels) and bin_sizes the count of cells with weight per class.
    """

    grid: LogPolarGrid
    weights: np.ndarray
    class_map: np.ndarray
    bin_sizes: np.ndarray

    @property
    def height(self) -> int:
        return self.weights.shape[0]

    @property
    def width(self) -> int:
        return self.weights.shape[1]

    @property
    def channels(self) -> int:
        return self.weights.shape[2]

    @property
    def half(self) -> Tuple[int, int]:
        return (self.height - 1) // 2, (self.width - 1) // 2

    def info(self):
        return {"grid": self.grid.info(), "shape": list(self.weights.shape)}
