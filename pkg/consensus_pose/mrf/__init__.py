import importlib.util
import os

from cachetools import LRUCache, cached

from .energy import (
    build_binary,
    build_unary,
    fold_midpoint,
    fold_synthetic,
    grid_cells,
    pair_cost,
    prune_labels,
    synthetic_cells,
)
from .solver import BaseSolver


@cached(cache=LRUCache(maxsize=8))
def get_solver(name):
    for dirpath, _, filenames in os.walk(os.path.join(os.path.dirname(__file__), "solvers")):
        filename: str
        for filename in filenames:
            if filename.endswith("_solver.py"):
                if filename.replace("_solver.py", "") == name:
                    spec = importlib.util.spec_from_file_location(
                        f"{__name__}.solvers.{name}_solver", os.path.join(dirpath, filename)
                    )
                    module = importlib.util.module_from_spec(spec)
                    spec.loader.exec_module(module)
                    return module.Solver
    return None


def trws_solve(model, max_iters=100, tol=1e-6, logger=None):
    from .solvers.trws_solver import trws_solve as solve

    return solve(model, max_iters, tol, logger)


def brute_force_map(model):
    from .solvers.brute_force_solver import brute_force_map as solve

    return solve(model)
