import numpy as np

from ...exceptions import InstanceTooLargeError
from ...models import EnergyModel, Labeling
from ..solver import BaseSolver

MAX_CONFIGURATIONS = 10**7


def brute_force_map(model: EnergyModel) -> Labeling:
    """Exact minimum by evaluating the energy of every joint labeling."""
    sizes = [model.num_labels(node) for node in model.nodes]
    count = 1
    for size in sizes:
        count *= size
    if count > MAX_CONFIGURATIONS:
        raise InstanceTooLargeError(f"{count} joint labelings exceed the limit of {MAX_CONFIGURATIONS}")

    axis = {node: n for n, node in enumerate(model.nodes)}
    ndim = len(model.nodes)
    total = np.zeros(sizes)
    for node in model.nodes:
        shape = [1] * ndim
        shape[axis[node]] = sizes[axis[node]]
        total = total + np.asarray(model.unaries[node]).reshape(shape)
    for (i, j), table in model.binaries.items():
        shape = [1] * ndim
        shape[axis[i]] = sizes[axis[i]]
        shape[axis[j]] = sizes[axis[j]]
        oriented = table if axis[i] < axis[j] else table.T
        total = total + oriented.reshape(shape)

    best = np.unravel_index(int(np.argmin(total)), total.shape)
    assignment = {node: int(best[axis[node]]) for node in model.nodes}
    energy = model.energy(assignment)
    return Labeling(assignment=assignment, energy=energy, lower_bound=energy, converged=True, iterations=1)


class Solver(BaseSolver):
    name = "brute_force"

    def minimize(self, model: EnergyModel) -> Labeling:
        return brute_force_map(model)
