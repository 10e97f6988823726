import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from consensus_pose.exceptions import ConfigError, InstanceTooLargeError, NoEvidenceError, ShapeError
from consensus_pose.models import EnergyModel, JointTable
from consensus_pose.mrf import (
    BaseSolver,
    brute_force_map,
    build_binary,
    build_unary,
    fold_synthetic,
    get_solver,
    grid_cells,
    prune_labels,
    trws_solve,
)
from consensus_pose.mrf.energy import EPSILON, link_role, synthetic_cells
from consensus_pose.prior import uniform_prior
from consensus_pose.selftest import constrained_minimum, folded_minimum, random_fold_instance, random_tree


def _joint():
    # 1x2 grid: x_i = (0, 0) with x_j = (0, 1), or the other way round
    dense = np.zeros((1, 2, 1, 2))
    dense[0, 0, 0, 1] = 0.6
    dense[0, 1, 0, 0] = 0.4
    return JointTable.from_dense((0, 1), dense, reach=1, factor=12)


def _loopy(rng, count=4, labels=3):
    nodes = list(range(count))
    unaries = {n: rng.normal(size=labels) for n in nodes}
    binaries = {(n, (n + 1) % count): rng.normal(size=(labels, labels)) * 2 for n in nodes}
    binaries[(0, 2)] = rng.normal(size=(labels, labels))
    return EnergyModel(nodes=nodes, labels={}, unaries=unaries, binaries=binaries)


def test_grid_cells_scanline():
    np.testing.assert_array_equal(grid_cells((2, 2)), [[0, 0], [0, 1], [1, 0], [1, 1]])


def test_prune_labels():
    values = np.array([[1.0, 5.0], [5.0, 2.0]])
    np.testing.assert_array_equal(prune_labels(values, 2), [[0, 1], [1, 0]])
    np.testing.assert_array_equal(prune_labels(values, 1), [[0, 1]])
    assert len(prune_labels(values, 0)) == 4
    assert len(prune_labels(values, 10)) == 4


def test_build_unary():
    values = np.array([[1.0, 3.0], [0.0, 0.0]])
    unary = build_unary(values, np.array([[0, 0], [0, 1], [1, 0]]))
    np.testing.assert_allclose(unary, [-math.log(0.25), -math.log(0.75), -math.log(EPSILON)])
    with pytest.raises(NoEvidenceError):
        build_unary(values, np.array([[1, 0], [1, 1]]))
    with pytest.raises(ShapeError):
        build_unary(values, np.array([[2, 0]]))


def test_binary_from_consensus_only():
    cells = grid_cells((1, 2))
    binary = build_binary(_joint(), None, 1.0, cells, cells)
    expected = [[-math.log(EPSILON), -math.log(0.6)], [-math.log(0.4), -math.log(EPSILON)]]
    np.testing.assert_allclose(binary, expected)


def test_uniform_prior_only_shifts_costs():
    cells = grid_cells((1, 2))
    consensus = build_binary(_joint(), None, 1.0, cells, cells)
    mixed = build_binary(_joint(), uniform_prior((0, 1), 12, radius=1), 0.5, cells, cells)
    np.testing.assert_allclose(mixed, 0.5 * consensus + 0.5 * math.log(9))
    # the costs are mixed, not the probabilities
    assert mixed[0, 0] == pytest.approx(-0.5 * math.log(EPSILON) + 0.5 * math.log(9))
    assert mixed[0, 0] != pytest.approx(-math.log(0.5 / 9))


def test_binary_parameter_checks():
    cells = grid_cells((1, 2))
    with pytest.raises(ShapeError):
        build_binary(_joint(), None, 0.5, cells, cells)
    with pytest.raises(ConfigError):
        build_binary(_joint(), None, 1.5, cells, cells)
    with pytest.raises(ShapeError):
        build_binary(_joint(), uniform_prior((0, 1), 4, radius=1), 0.5, cells, cells)


def test_synthetic_cells_round_half_away():
    cells = synthetic_cells(np.array([[0, 0]]), np.array([[1, 3]]), 0.5, 0.5)
    np.testing.assert_array_equal(cells[0, 0], [1, 2])
    hand = synthetic_cells(np.array([[0, 0]]), np.array([[0, 2]]), -0.3, 1.3)
    np.testing.assert_array_equal(hand[0, 0], [0, 3])


def test_off_grid_synthetic_costs_eps():
    shape = (1, 3)
    phi_s = np.zeros(3)
    table = np.zeros((3, 1))
    cost = fold_synthetic(phi_s, [("j", table)], -0.3, 1.3, np.array([[0, 0]]), np.array([[0, 2]]), shape)
    assert cost[0, 0] == pytest.approx(-2 * math.log(EPSILON))
    inside = fold_synthetic(phi_s + 1.0, [("j", table)], -0.3, 1.3, np.array([[0, 1]]), np.array([[0, 1]]), shape)
    assert inside[0, 0] == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fold_equals_constrained_minimum(seed):
    instance = random_fold_instance(np.random.default_rng(seed), max_side=4)
    assert folded_minimum(instance) == constrained_minimum(instance)


def test_link_roles():
    assert link_role((3, 9), (3, 4), 9) == "i"
    assert link_role((9, 4), (3, 4), 9) == "j"
    assert link_role((4, 9), (3, 4), 9) == "j"
    with pytest.raises(ShapeError):
        link_role((3, 4), (3, 4), 9)


def test_energy_model_validation():
    with pytest.raises(ShapeError):
        EnergyModel(nodes=[0, 1], labels={}, unaries={0: np.zeros(2), 1: np.zeros(3)}, binaries={(0, 1): np.zeros((3, 2))})
    with pytest.raises(ShapeError):
        EnergyModel(nodes=[0], labels={}, unaries={0: np.array([np.inf])})
    with pytest.raises(ShapeError):
        EnergyModel(nodes=[0], labels={}, unaries={0: np.zeros(0)})


def test_forest_and_connectivity(rng):
    tree = random_tree(rng, max_nodes=5)
    assert tree.is_forest()
    loopy = _loopy(rng)
    assert not loopy.is_forest() and loopy.is_connected()
    apart = EnergyModel(nodes=[0, 1], labels={}, unaries={0: np.zeros(2), 1: np.zeros(2)})
    assert apart.is_forest() and not apart.is_connected()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trws_is_exact_on_trees(seed):
    model = random_tree(np.random.default_rng(seed))
    exact = brute_force_map(model)
    labeling = trws_solve(model)
    assert labeling.energy == pytest.approx(exact.energy, abs=1e-9)
    assert labeling.converged
    assert labeling.gap == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_trws_bound_on_loopy_graphs(seed):
    model = _loopy(np.random.default_rng(seed))
    exact = brute_force_map(model)
    labeling = trws_solve(model, max_iters=50)
    assert labeling.energy >= exact.energy - 1e-9
    assert labeling.lower_bound <= exact.energy + 1e-9
    assert labeling.lower_bound <= labeling.energy + 1e-9
    assert labeling.lower_bound == max(labeling.bound_history)
    # raw per-iteration bounds, not a running maximum
    assert np.all(np.diff(labeling.bound_history) >= -1e-9)
    assert labeling.energy == pytest.approx(model.energy(labeling.assignment))


def test_constant_shift_keeps_argmin(rng):
    model = _loopy(rng)
    shifted = EnergyModel(
        nodes=model.nodes,
        labels={},
        unaries={n: u + 7.5 for n, u in model.unaries.items()},
        binaries={e: t + 1.25 for e, t in model.binaries.items()},
    )
    assert brute_force_map(shifted).assignment == brute_force_map(model).assignment


def test_brute_force_limit():
    nodes = list(range(8))
    model = EnergyModel(nodes=nodes, labels={}, unaries={n: np.zeros(10) for n in nodes})
    with pytest.raises(InstanceTooLargeError):
        brute_force_map(model)


def test_solver_registry(quiet_logger):
    trws = get_solver("trws")
    assert issubclass(trws, BaseSolver) and trws.name == "trws"
    assert get_solver("brute_force").name == "brute_force"
    assert get_solver("simplex") is None
    # modules are loaded once per name
    assert get_solver("trws") is trws

    model = EnergyModel(
        nodes=[0, 1],
        labels={0: np.array([[0, 0], [2, 3]]), 1: np.array([[1, 1]])},
        unaries={0: np.array([1.0, 0.0]), 1: np.array([0.0])},
        binaries={(0, 1): np.array([[0.0], [0.5]])},
    )
    labeling = trws(quiet_logger, max_iters=10).solve(model)
    assert labeling.assignment == {0: 1, 1: 0}
    assert labeling.cells == {0: (2, 3), 1: (1, 1)}
