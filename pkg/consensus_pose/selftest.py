"""
Oracle-equivalence suites on seeded random instances: fast paths against
their literal-loop counterparts and TRW-S against exhaustive search.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np
from tqdm import tqdm

from .consensus import joint_table, naive_joint
from .geometry import build_kernel
from .logger import Logger
from .models import CoarseField, EnergyModel, LogPolarGrid, VoterField
from .mrf import brute_force_map, fold_midpoint, grid_cells, trws_solve
from .mrf.energy import synthetic_cells
from .voting import aggregate, naive_aggregate

SMALL_GRID = LogPolarGrid(num_rings=2, angular_bins=4, ring_boundaries=(1.0, 2.0, 4.0))


def random_distributions(rng, shape, classes, background_weight=1.0) -> np.ndarray:
    values = rng.random(tuple(shape) + (classes,))
    values[..., -1] *= background_weight
    return values / values.sum(axis=-1, keepdims=True)


def random_field(rng, max_side=16, grid: LogPolarGrid = SMALL_GRID, stride=4) -> VoterField:
    shape = tuple(rng.integers(1, max_side + 1, size=2))
    values = random_distributions(rng, shape, grid.num_classes)
    return VoterField(keypoint_id=0, values=values, stride=stride, grid=grid)


def random_coarse_pair(rng, max_side=8, grid: LogPolarGrid = SMALL_GRID) -> Tuple[CoarseField, CoarseField]:
    shape = tuple(rng.integers(1, max_side + 1, size=2))
    fields = []
    for kid in (0, 1):
        values = random_distributions(rng, shape, grid.num_classes)
        fields.append(CoarseField(keypoint_id=kid, values=values, factor=12, grid=grid))
    return fields[0], fields[1]


def random_tree(rng, max_nodes=6, max_labels=8) -> EnergyModel:
    count = int(rng.integers(1, max_nodes + 1))
    nodes = list(rng.permutation(count).tolist())
    sizes = {node: int(rng.integers(1, max_labels + 1)) for node in nodes}
    unaries = {node: rng.normal(size=sizes[node]) for node in nodes}
    binaries = {}
    for n in range(1, count):
        parent = nodes[int(rng.integers(0, n))]
        child = nodes[n]
        pair = (parent, child) if rng.random() < 0.5 else (child, parent)
        binaries[pair] = rng.normal(size=(sizes[pair[0]], sizes[pair[1]]))
    return EnergyModel(nodes=sorted(nodes), labels={}, unaries=unaries, binaries=binaries)


def random_fold_instance(rng, max_side=6):
    """Integer costs on a small grid so that both sides sum exactly."""
    shape = tuple(int(s) for s in rng.integers(1, max_side + 1, size=2))
    cells = grid_cells(shape)
    size = len(cells)
    return {
        "shape": shape,
        "cells": cells,
        "phi_i": rng.integers(0, 20, size=size).astype(np.float64),
        "phi_j": rng.integers(0, 20, size=size).astype(np.float64),
        "phi_l": rng.integers(0, 20, size=size).astype(np.float64),
        "phi_il": rng.integers(0, 20, size=(size, size)).astype(np.float64),
        "phi_lj": rng.integers(0, 20, size=(size, size)).astype(np.float64),
    }


def constrained_minimum(instance) -> float:
    """min over (x_i, x_j) of the three-variable energy with x_l pinned to the rounded midpoint."""
    shape, cells = instance["shape"], instance["cells"]
    mid = synthetic_cells(cells, cells, 0.5, 0.5)
    best = np.inf
    for a in range(len(cells)):
        for b in range(len(cells)):
            m = int(mid[a, b, 0]) * shape[1] + int(mid[a, b, 1])
            total = instance["phi_i"][a] + instance["phi_j"][b]
            total += instance["phi_l"][m] + instance["phi_il"][a, m] + instance["phi_lj"][m, b]
            best = min(best, total)
    return best


def folded_minimum(instance) -> float:
    cells = instance["cells"]
    folded = fold_midpoint(
        instance["phi_l"], instance["phi_il"], instance["phi_lj"], cells, cells, instance["shape"]
    )
    total = instance["phi_i"][:, None] + instance["phi_j"][None, :] + folded
    return float(total.min())


@dataclass
class SuiteResult:
    name: str
    rounds: int = 0
    failures: int = 0
    worst: float = 0.0

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def info(self):
        return {"suite": self.name, "rounds": self.rounds, "failures": self.failures, "worst": self.worst}


def _aggregation(rng, result: SuiteResult):
    field_ = random_field(rng)
    kernel = build_kernel(field_.grid, 9, 9)
    diff = float(np.max(np.abs(aggregate(field_, kernel).values - naive_aggregate(field_, kernel).values)))
    result.worst = max(result.worst, diff)
    return diff <= 1e-9


def _consensus(rng, result: SuiteResult):
    field_i, field_j = random_coarse_pair(rng, max_side=6)
    kernel = build_kernel(field_i.grid, 9, 9)
    diff = float(np.max(np.abs(joint_table(field_i, field_j, kernel).values - naive_joint(field_i, field_j, kernel).values)))
    result.worst = max(result.worst, diff)
    return diff <= 1e-9


def _folding(rng, result: SuiteResult):
    instance = random_fold_instance(rng)
    diff = abs(folded_minimum(instance) - constrained_minimum(instance))
    result.worst = max(result.worst, diff)
    return diff == 0.0


def _trws_trees(rng, result: SuiteResult):
    model = random_tree(rng)
    diff = abs(trws_solve(model).energy - brute_force_map(model).energy)
    result.worst = max(result.worst, diff)
    return diff == 0.0


SUITES: Dict[str, Tuple[Callable, int]] = {
    "aggregation": (_aggregation, 200),
    "consensus": (_consensus, 200),
    "folding": (_folding, 500),
    "trws_trees": (_trws_trees, 200),
}


def selftest(seed: int = 0, scale: float = 1.0, logger: Logger = None, progress: bool = True) -> List[SuiteResult]:
    """Run every suite; `scale` multiplies the number of rounds."""
    results = []
    for offset, (name, (check, rounds)) in enumerate(SUITES.items()):
        rng = np.random.default_rng([seed, offset])
        result = SuiteResult(name=name)
        for _ in tqdm(range(max(1, int(rounds * scale))), desc=name, disable=not progress, leave=False):
            result.rounds += 1
            if not check(rng, result):
                result.failures += 1
        if logger is not None:
            level = "info" if result.passed else "error"
            logger.log(f"selftest {name}: {result.rounds} rounds, {result.failures} failures, worst {result.worst:.3g}", level)
        results.append(result)
    return results
