from typing import Dict

import numpy as np

from ..logger import Logger
from ..models import EnergyModel, Labeling


class BaseSolver:
    """
    MAP solver over an EnergyModel. Subclasses live in solvers/<name>_solver.py
    as `Solver` and implement minimize().
    """

    name = "base"

    def __init__(self, logger: Logger = None, max_iters: int = 100, tol: float = 1e-6):
        self.logger = logger
        self.max_iters = max_iters
        self.tol = tol

    def solve(self, model: EnergyModel) -> Labeling:
        labeling = self.minimize(model)
        labeling.cells = self.cells(model, labeling.assignment)
        if self.logger is not None:
            self.logger.debug(
                f"{self.name}: energy {labeling.energy:.6f}, bound {labeling.lower_bound}, "
                f"{labeling.iterations} iterations"
            )
        return labeling

    def minimize(self, model: EnergyModel) -> Labeling:
        raise NotImplementedError

    @staticmethod
    def cells(model: EnergyModel, assignment: Dict[int, int]):
        out = {}
        for node, label in assignment.items():
            if node in model.labels:
                row, col = np.asarray(model.labels[node])[label]
                out[node] = (int(row), int(col))
        return out
