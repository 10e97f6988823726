"""
Sequential tree-reweighted message passing (TRW-S) for pairwise energies.

Nodes are visited in the model's node order. Messages are updated in a forward
pass along that order and a backward pass against it; each node weights its
belief by 1 / max(#earlier neighbors, #later neighbors), which corresponds to
covering the graph with the monotonic chains the lower bound is computed on.
"""
import math
from typing import Dict, List, Tuple

import numpy as np

from ...logger import Logger
from ...models import EnergyModel, Labeling
from ..solver import BaseSolver


class _Chains:
    """Edges oriented along the node order, message storage and the chain cover."""

    def __init__(self, model: EnergyModel):
        self.model = model
        position = {node: n for n, node in enumerate(model.nodes)}
        self.edges: List[Tuple[int, int, np.ndarray]] = []
        for (i, j), table in model.binaries.items():
            if position[i] < position[j]:
                self.edges.append((i, j, np.asarray(table, dtype=np.float64)))
            else:
                self.edges.append((j, i, np.asarray(table, dtype=np.float64).T))

        self.incoming: Dict[int, List[int]] = {node: [] for node in model.nodes}
        self.outgoing: Dict[int, List[int]] = {node: [] for node in model.nodes}
        for e, (s, t, _) in enumerate(self.edges):
            self.outgoing[s].append(e)
            self.incoming[t].append(e)

        self.rho = {node: max(len(self.incoming[node]), len(self.outgoing[node]), 1) for node in model.nodes}
        self.unaries = {node: np.asarray(model.unaries[node], dtype=np.float64) for node in model.nodes}
        # to_t[e] is the message from the edge's earlier node to its later node
        self.to_t = [np.zeros(len(self.unaries[t])) for _, t, _ in self.edges]
        self.to_s = [np.zeros(len(self.unaries[s])) for s, _, _ in self.edges]
        self.chains = self._cover()

    def _cover(self) -> List[List[int]]:
        chains: List[List[int]] = []
        ending: Dict[int, List[int]] = {node: [] for node in self.model.nodes}
        for node in self.model.nodes:
            for k, e in enumerate(self.outgoing[node]):
                if k < len(ending[node]):
                    chain = ending[node][k]
                    chains[chain].append(e)
                else:
                    chain = len(chains)
                    chains.append([e])
                ending[self.edges[e][1]].append(chain)
        return chains

    def belief(self, node: int) -> np.ndarray:
        out = self.unaries[node].copy()
        for e in self.incoming[node]:
            out += self.to_t[e]
        for e in self.outgoing[node]:
            out += self.to_s[e]
        return out

    def forward(self):
        for node in self.model.nodes:
            if not self.outgoing[node]:
                continue
            weighted = self.belief(node) / self.rho[node]
            for e in self.outgoing[node]:
                message = (weighted - self.to_s[e])[:, None] + self.edges[e][2]
                message = message.min(axis=0)
                self.to_t[e] = message - message.min()

    def backward(self):
        for node in reversed(self.model.nodes):
            if not self.incoming[node]:
                continue
            weighted = self.belief(node) / self.rho[node]
            for e in self.incoming[node]:
                message = self.edges[e][2] + (weighted - self.to_t[e])[None, :]
                message = message.min(axis=1)
                self.to_s[e] = message - message.min()

    def lower_bound(self) -> float:
        """Sum over the chain cover of each chain's minimum of the reparametrized energy."""
        beliefs = {node: self.belief(node) for node in self.model.nodes}
        bound = 0.0
        for node in self.model.nodes:
            if not self.incoming[node] and not self.outgoing[node]:
                bound += float(beliefs[node].min())
        for chain in self.chains:
            first = self.edges[chain[0]][0]
            cost = beliefs[first] / self.rho[first]
            for e in chain:
                _, t, table = self.edges[e]
                pair = table - self.to_t[e][None, :] - self.to_s[e][:, None]
                cost = (cost[:, None] + pair).min(axis=0) + beliefs[t] / self.rho[t]
            bound += float(cost.min())
        return bound

    def decode(self) -> Dict[int, int]:
        """Sequential labeling: fix nodes in order given the already fixed earlier neighbors."""
        assignment: Dict[int, int] = {}
        for node in self.model.nodes:
            cost = self.unaries[node].copy()
            for e in self.incoming[node]:
                s, _, table = self.edges[e]
                cost += table[assignment[s], :]
            for e in self.outgoing[node]:
                cost += self.to_s[e]
            assignment[node] = int(np.argmin(cost))
        return assignment


def forest_map(model: EnergyModel) -> Dict[int, int]:
    """Exact min-sum labeling of a forest-structured model by leaf-to-root elimination."""
    seen = set()
    assignment: Dict[int, int] = {}
    for root in model.nodes:
        if root in seen:
            continue
        order, parent = [], {root: None}
        stack = [root]
        seen.add(root)
        while stack:
            node = stack.pop()
            order.append(node)
            for other in model.neighbors(node):
                if other not in seen:
                    seen.add(other)
                    parent[other] = node
                    stack.append(other)

        cost = {node: np.asarray(model.unaries[node], dtype=np.float64).copy() for node in order}
        choice = {}
        for node in reversed(order):
            up = parent[node]
            if up is None:
                continue
            table = model.pairwise(up, node) + cost[node][None, :]
            choice[node] = np.argmin(table, axis=1)
            cost[up] = cost[up] + table.min(axis=1)

        assignment[root] = int(np.argmin(cost[root]))
        for node in order[1:]:
            assignment[node] = int(choice[node][assignment[parent[node]]])
    return assignment


def trws_solve(model: EnergyModel, max_iters: int = 100, tol: float = 1e-6, logger: Logger = None) -> Labeling:
    chains = _Chains(model)
    forest = model.is_forest()

    best_bound = -math.inf
    best_assignment, best_energy = None, math.inf
    history: List[float] = []
    converged = False
    iterations = 0

    for iterations in range(1, max(1, max_iters) + 1):
        chains.forward()
        chains.backward()
        bound = chains.lower_bound()
        gain = bound - best_bound
        best_bound = max(best_bound, bound)
        history.append(bound)

        assignment = chains.decode()
        energy = model.energy(assignment)
        if energy < best_energy:
            best_assignment, best_energy = assignment, energy

        if best_energy - best_bound <= tol * max(1.0, abs(best_energy)):
            converged = True
            break
        if iterations > 1 and gain < tol:
            converged = True
            break

    if forest:
        assignment = forest_map(model)
        energy = model.energy(assignment)
        if energy <= best_energy:
            best_assignment, best_energy = assignment, energy
        # on a forest the exact minimum is the tightest lower bound
        best_bound = best_energy
        converged = True

    if not converged and logger is not None:
        logger.warning(
            f"TRW-S stopped after {iterations} iterations without converging "
            f"(energy {best_energy:.6f}, bound {best_bound:.6f})"
        )
    return Labeling(
        assignment=best_assignment,
        energy=best_energy,
        lower_bound=best_bound,
        converged=converged,
        iterations=iterations,
        bound_history=history,
    )


class Solver(BaseSolver):
    name = "trws"

    def minimize(self, model: EnergyModel) -> Labeling:
        return trws_solve(model, self.max_iters, self.tol, self.logger)
