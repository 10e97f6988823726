from dataclasses import dataclass
from typing import Tuple

import numpy as np


@dataclass(eq=False)
class JointTable:
    """
    Consensus joint distribution P(K_i = x_i, K_j = x_j) over the coarse grid.

    Stored as a band: values[r, c, dr + reach, dc + reach] is the probability of
    x_i = (r, c) and x_j = (r + dr, c + dc). Entries with |dr| or |dc| > reach
    are zero by construction (two votes of one voter are never further apart).
    """

    pair: Tuple[int, int]
    values: np.ndarray
    reach: int
    factor: int
    normalization: float = 1.0

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.values.shape[0], self.values.shape[1]

    def lookup(self, cells_i: np.ndarray, cells_j: np.ndarray) -> np.ndarray:
        """
        Table entries for every (cells_i[a], cells_j[b]); cells are (N, 2) integer
        arrays of coarse (row, col). Returns an array of shape (len(cells_i), len(cells_j)).
        """
        cells_i = np.asarray(cells_i, dtype=np.int64).reshape(-1, 2)
        cells_j = np.asarray(cells_j, dtype=np.int64).reshape(-1, 2)
        delta = cells_j[None, :, :] - cells_i[:, None, :] + self.reach
        inside = np.all((delta >= 0) & (delta <= 2 * self.reach), axis=2)
        delta = np.clip(delta, 0, 2 * self.reach)
        rows = np.broadcast_to(cells_i[:, None, 0], inside.shape)
        cols = np.broadcast_to(cells_i[:, None, 1], inside.shape)
        out = self.values[rows, cols, delta[..., 0], delta[..., 1]]
        return np.where(inside, out, 0.0)

    def at(self, cells_i: np.ndarray, cells_j: np.ndarray) -> np.ndarray:
        """Elementwise entries for broadcastable (..., 2) cell arrays; 0 off the grid."""
        cells_i, cells_j = np.broadcast_arrays(
            np.asarray(cells_i, dtype=np.int64), np.asarray(cells_j, dtype=np.int64)
        )
        height, width = self.grid_shape
        delta = cells_j - cells_i + self.reach
        inside = np.all((delta >= 0) & (delta <= 2 * self.reach), axis=-1)
        inside &= (cells_i[..., 0] >= 0) & (cells_i[..., 0] < height)
        inside &= (cells_i[..., 1] >= 0) & (cells_i[..., 1] < width)
        inside &= (cells_j[..., 0] >= 0) & (cells_j[..., 0] < height)
        inside &= (cells_j[..., 1] >= 0) & (cells_j[..., 1] < width)
        delta = np.clip(delta, 0, 2 * self.reach)
        rows = np.clip(cells_i[..., 0], 0, height - 1)
        cols = np.clip(cells_i[..., 1], 0, width - 1)
        out = self.values[rows, cols, delta[..., 0], delta[..., 1]]
        return np.where(inside, out, 0.0)

    def dense(self) -> np.ndarray:
        """Expand to the 4-D table indexed [r_i, c_i, r_j, c_j]."""
        height, width = self.grid_shape
        out = np.zeros((height, width, height, width))
        span = 2 * self.reach + 1
        for dr in range(span):
            for dc in range(span):
                shift_r, shift_c = dr - self.reach, dc - self.reach
                for r in range(max(0, -shift_r), min(height, height - shift_r)):
                    c0, c1 = max(0, -shift_c), min(width, width - shift_c)
                    if c0 >= c1:
                        continue
                    cols = np.arange(c0, c1)
                    out[r, cols, r + shift_r, cols + shift_c] = self.values[r, cols, dr, dc]
        return out

    @classmethod
    def from_dense(cls, pair: Tuple[int, int], dense: np.ndarray, reach: int, factor: int, normalization=1.0):
        height, width = dense.shape[:2]
        span = 2 * reach + 1
        values = np.zeros((height, width, span, span))
        for r in range(height):
            for c in range(width):
                for dr in range(span):
                    for dc in range(span):
                        rj, cj = r + dr - reach, c + dc - reach
                        if 0 <= rj < height and 0 <= cj < width:
                            values[r, c, dr, dc] = dense[r, c, rj, cj]
        return cls(pair=pair, values=values, reach=reach, factor=factor, normalization=normalization)

    def transpose(self) -> "JointTable":
        """The same distribution with the roles of i and j swapped."""
        height, width = self.grid_shape
        span = 2 * self.reach + 1
        values = np.zeros_like(self.values)
        for dr in range(span):
            for dc in range(span):
                shift_r, shift_c = dr - self.reach, dc - self.reach
                r0, r1 = max(0, -shift_r), min(height, height - shift_r)
                c0, c1 = max(0, -shift_c), min(width, width - shift_c)
                if r0 >= r1 or c0 >= c1:
                    continue
                values[r0 + shift_r:r1 + shift_r, c0 + shift_c:c1 + shift_c, span - 1 - dr, span - 1 - dc] = (
                    self.values[r0:r1, c0:c1, dr, dc]
                )
        return JointTable(
            pair=(self.pair[1], self.pair[0]),
            values=values,
            reach=self.reach,
            factor=self.factor,
            normalization=self.normalization,
        )

    def info(self):
        return {
            "pair": list(self.pair),
            "grid_shape": list(self.grid_shape),
            "reach": self.reach,
            "factor": self.factor,
            "normalization": self.normalization,
        }


@dataclass(eq=False)
class PriorTable:
    """
    Image-independent relative-location score over coarse displacements
    x_j - x_i; values[dr + radius, dc + radius]. Displacements beyond the
    radius clamp to the border bins.
    """

    pair: Tuple[int, int]
    values: np.ndarray
    radius: int
    factor: int
    sigma: float = 1.0
    floor: float = 1e-6
    samples: int = 0
    clamped: int = 0

    def score(self, delta: np.ndarray) -> np.ndarray:
        delta = np.clip(np.asarray(delta, dtype=np.int64), -self.radius, self.radius) + self.radius
        return self.values[delta[..., 0], delta[..., 1]]

    def info(self):
        return {
            "pair": list(self.pair),
            "radius": self.radius,
            "factor": self.factor,
            "sigma": self.sigma,
            "floor": self.floor,
            "samples": self.samples,
            "clamped": self.clamped,
        }
