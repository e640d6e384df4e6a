"""
对称约化测试模块
"""
import numpy as np
import pytest

from core.assembly import assemble_dual, assemble_primal
from core.detection import ConfigKind, ExperimentParams, ProbTable, model_table
from core.exceptions import SymmetryError
from core.states import build_states
from core.symmetry import (
    assemble_reduced,
    check_table_symmetry,
    outcome_classes,
    reduce_by_symmetry,
    strategy_orbits,
)


@pytest.mark.parametrize("n,d", [(2, 2), (2, 3), (3, 3), (3, 4), (4, 5)])
def test_orbit_sizes_cover_all_strategies(n, d):
    """轨道大小之和为 d^n"""
    representatives, sizes = strategy_orbits(n, d)
    assert sizes.sum() == d ** n
    assert representatives.shape == (len(sizes), n)
    assert np.all(sizes >= 1)


def test_orbit_counts_small():
    """n=2, d=2: {00,11} 为一个轨道, 01 与 10 各自不动"""
    representatives, sizes = strategy_orbits(2, 2)
    assert [tuple(r) for r in representatives] == [(0, 0), (0, 1), (1, 0)]
    np.testing.assert_array_equal(sizes, [2.0, 1.0, 1.0])


def test_orbits_need_enough_outcomes():
    with pytest.raises(SymmetryError):
        strategy_orbits(3, 2)


def test_outcome_classes():
    """0 为猜中, 1 为其他确定性输出, 2+f 为固定输出"""
    classes = outcome_classes(3, 4)
    expected = np.array([
        [0, 1, 1, 2],
        [1, 0, 1, 2],
        [1, 1, 0, 2],
    ])
    np.testing.assert_array_equal(classes, expected)


def test_model_tables_are_symmetric(config1_table):
    """Config I 与 Config II 的模型表都满足置换对称"""
    assert check_table_symmetry(config1_table) < 1e-12
    config2 = model_table(ExperimentParams(config=ConfigKind.CONFIG_II, n_inputs=3, mu=0.164, epsilon=1e-4))
    assert check_table_symmetry(config2) < 1e-12


def test_asymmetric_table_rejected():
    table = ProbTable(n=2, d=2, p=np.array([[0.9, 0.1], [0.2, 0.8]]))
    with pytest.raises(SymmetryError):
        check_table_symmetry(table)
    with pytest.raises(SymmetryError):
        assemble_reduced(build_states(2, 0.5), table)


def test_reduced_problem_structure(config1_table):
    """约化问题: 重数之和为 d^n, 单位平移对全部类求和为全1"""
    states = build_states(3, 0.64)
    primal, dual = assemble_reduced(states, config1_table)
    assert dual.reduced and primal.reduced
    assert dual.multiplicities.sum() == 64
    assert dual.constraint_count == 3
    np.testing.assert_allclose(np.einsum("c,cxb->xb", dual.unit_shift, dual.weights), 1.0)
    np.testing.assert_allclose(dual.unit_shift, [3.0, 6.0, 3.0])


def test_reduced_targets_average_orbits(binary_table, binary_states):
    _, dual = assemble_reduced(binary_states, binary_table)
    np.testing.assert_allclose(dual.targets, [0.9, 0.1])


def test_reduce_by_symmetry_matches_direct(config1_table):
    """先组装再约化与直接组装约化问题一致"""
    states = build_states(3, 0.64)
    reduced = reduce_by_symmetry(assemble_dual(states, config1_table))
    _, direct = assemble_reduced(states, config1_table)
    assert reduced.same_structure(direct)
    np.testing.assert_allclose(reduced.targets, direct.targets)
    assert type(reduce_by_symmetry(assemble_primal(states, config1_table))).__name__ == "PrimalProblem"


def test_reduce_by_symmetry_idempotent(config1_table):
    states = build_states(3, 0.64)
    reduced = reduce_by_symmetry(assemble_dual(states, config1_table))
    assert reduce_by_symmetry(reduced) is reduced
