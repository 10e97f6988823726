from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..exceptions import ShapeError

Edge = Tuple[int, int]


@dataclass(eq=False)
class EnergyModel:
    """
    Pairwise energy sum_i phi_i(x_i) + sum_(i,j) phi_ij(x_i, x_j).

    `nodes` fixes the node order used by the solvers. labels[i] holds the
    coarse (row, col) cell of every label of node i, unaries[i] its cost vector
    and binaries[(i, j)] a (len(labels[i]), len(labels[j])) cost table.
    """

    nodes: List[int]
    labels: Dict[int, np.ndarray]
    unaries: Dict[int, np.ndarray]
    binaries: Dict[Edge, np.ndarray] = field(default_factory=dict)
    lam: float = 0.5
    eps: float = 1e-8

    def __post_init__(self):
        for node in self.nodes:
            if node not in self.unaries:
                raise ShapeError(f"node {node} has no unary")
            if len(self.unaries[node]) == 0:
                raise ShapeError(f"node {node} has an empty label space")
            if node in self.labels and len(self.labels[node]) != len(self.unaries[node]):
                raise ShapeError(f"node {node}: {len(self.labels[node])} labels but {len(self.unaries[node])} costs")
            if not np.all(np.isfinite(self.unaries[node])):
                raise ShapeError(f"node {node} has non-finite unary costs")
        for (i, j), table in self.binaries.items():
            if i not in self.unaries or j not in self.unaries:
                raise ShapeError(f"edge {(i, j)} references an unknown node")
            expected = (len(self.unaries[i]), len(self.unaries[j]))
            if table.shape != expected:
                raise ShapeError(f"edge {(i, j)} table has shape {table.shape}, expected {expected}")
            if not np.all(np.isfinite(table)):
                raise ShapeError(f"edge {(i, j)} has non-finite costs")

    def num_labels(self, node: int) -> int:
        return len(self.unaries[node])

    def neighbors(self, node: int) -> List[int]:
        out = []
        for i, j in self.binaries:
            if i == node:
                out.append(j)
            elif j == node:
                out.append(i)
        return out

    def pairwise(self, i: int, j: int) -> np.ndarray:
        """Edge table oriented as [x_i, x_j], whichever way it is stored."""
        if (i, j) in self.binaries:
            return self.binaries[(i, j)]
        return self.binaries[(j, i)].T

    def energy(self, assignment: Dict[int, int]) -> float:
        total = 0.0
        for node in self.nodes:
            total += float(self.unaries[node][assignment[node]])
        for (i, j), table in self.binaries.items():
            total += float(table[assignment[i], assignment[j]])
        return total

    def is_forest(self) -> bool:
        parent = {node: node for node in self.nodes}

        def find(node):
            while parent[node] != node:
                parent[node] = parent[parent[node]]
                node = parent[node]
            return node

        for i, j in self.binaries:
            root_i, root_j = find(i), find(j)
            if root_i == root_j:
                return False
            parent[root_i] = root_j
        return True

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        seen = {self.nodes[0]}
        stack = [self.nodes[0]]
        while stack:
            for other in self.neighbors(stack.pop()):
                if other not in seen:
                    seen.add(other)
                    stack.append(other)
        return len(seen) == len(self.nodes)

    def info(self):
        return {
            "nodes": list(self.nodes),
            "labels": {node: self.num_labels(node) for node in self.nodes},
            "edges": [list(edge) for edge in self.binaries],
            "lambda": self.lam,
            "eps": self.eps,
        }


@dataclass(eq=False)
class Labeling:
    """
    MAP result: assignment maps node -> label index; cells maps node -> the
    coarse cell of that label when the model carries label coordinates.
    """

    assignment: Dict[int, int]
    energy: float
    lower_bound: Optional[float] = None
    converged: bool = True
    iterations: int = 0
    bound_history: List[float] = field(default_factory=list)
    cells: Dict[int, Tuple[int, int]] = field(default_factory=dict)

    @property
    def gap(self) -> Optional[float]:
        if self.lower_bound is None:
            return None
        return self.energy - self.lower_bound

    def info(self):
        return {
            "assignment": dict(self.assignment),
            "energy": self.energy,
            "lower_bound": self.lower_bound,
            "gap": self.gap,
            "converged": self.converged,
            "iterations": self.iterations,
        }
