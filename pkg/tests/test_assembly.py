"""
SDP 组装测试模块
"""
import numpy as np
import pytest

from core.assembly import (
    assemble_dual,
    assemble_primal,
    enumerate_strategies,
    strategy_array,
    strategy_index,
)
from core.detection import ProbTable
from core.engine import trivial_certificate
from core.exceptions import DimensionError, DomainError, StrategyLimitError
from core.states import build_states


def test_enumerate_strategies_lexicographic():
    """d^n 个策略按字典序排列"""
    strategies = enumerate_strategies(2, 3)
    assert len(strategies) == 9
    assert strategies[0] == (0, 0)
    assert strategies[1] == (0, 1)
    assert strategies[-1] == (2, 2)
    assert [tuple(r) for r in strategy_array(2, 3)] == strategies


def test_strategy_index_inverse():
    """strategy_index 是字典序位置"""
    array = strategy_array(3, 4)
    np.testing.assert_array_equal(strategy_index(array, 4), np.arange(64))


def test_strategy_cap():
    """超过上限时拒绝"""
    with pytest.raises(StrategyLimitError):
        strategy_array(3, 4, cap=63)
    with pytest.raises(DomainError):
        strategy_array(9, 2)


def _povm_point(problem, povm):
    """与策略无关的原可行点 M_b^k = N_b / K"""
    k = problem.strategy_count
    return np.broadcast_to(povm[None] / k, (k,) + povm.shape).copy()


def _povm_table(states, povm):
    p = np.einsum("xi,bij,xj->xb", states.vectors, povm, states.vectors)
    return ProbTable(n=states.n, d=povm.shape[0], p=p)


def test_primal_feasible_point():
    """由 POVM 得到的概率表使对应原变量的残差为零, 目标值为 1/d"""
    states = build_states(2, 0.5)
    v = np.array([1.0, 1.0]) / np.sqrt(2.0)
    w = np.array([1.0, -1.0]) / np.sqrt(2.0)
    povm = np.stack([np.outer(v, v), np.outer(w, w)])
    table = _povm_table(states, povm)
    primal = assemble_primal(states, table)

    m = _povm_point(primal, povm)
    np.testing.assert_allclose(primal.data_residuals(m), 0.0, atol=1e-12)
    np.testing.assert_allclose(primal.normalization_residuals(m), 0.0, atol=1e-12)
    assert primal.evaluate_objective(m) == pytest.approx(0.5)


def test_full_problem_dimensions(config1_table):
    """完整问题: C = n·d, 块数 = d^n · d"""
    states = build_states(3, 0.64)
    dual = assemble_dual(states, config1_table)
    assert dual.constraint_count == 12
    assert dual.strategy_count == 64
    assert dual.block_count == 256
    assert dual.data_matrix().shape == (12, 64 * 4 * 3)
    np.testing.assert_allclose(np.einsum("c,cxb->xb", dual.unit_shift, dual.weights), 1.0)


def test_constant_blocks_sum(config1_table):
    """每个策略的常数块对 b 求和为 (1/n) sum_x rho_x"""
    states = build_states(3, 0.64)
    dual = assemble_dual(states, config1_table)
    frame = dual.projectors().sum(axis=0) / 3
    total = dual.constant_blocks().sum(axis=1)
    for k in range(dual.strategy_count):
        np.testing.assert_allclose(total[k], frame, atol=1e-12)


def test_trivial_certificate_is_feasible(config1_table):
    """平凡证书的 LMI 块全部负定, 目标值 1+τ"""
    states = build_states(3, 0.64)
    dual = assemble_dual(states, config1_table)
    cert = trivial_certificate(dual, tau=1e-6)
    blocks = dual.lmi_blocks(cert.nu, cert.H)
    assert np.linalg.eigvalsh(blocks).max() < 0.0
    assert dual.objective(cert.nu) == pytest.approx(1.0 + 1e-6)


def test_weak_duality_on_feasible_pair():
    """原可行点的目标值不超过对偶可行点的目标值"""
    states = build_states(2, 0.3)
    v = np.array([np.cos(0.4), np.sin(0.4)])
    w = np.array([-np.sin(0.4), np.cos(0.4)])
    povm = np.stack([np.outer(v, v), np.outer(w, w)])
    table = _povm_table(states, povm)
    primal = assemble_primal(states, table)
    dual = assemble_dual(states, table)
    cert = trivial_certificate(dual)
    assert primal.evaluate_objective(_povm_point(primal, povm)) <= dual.objective(cert.nu)


def test_dimension_mismatch(config1_table):
    """态族与表维度不符"""
    with pytest.raises(DimensionError):
        assemble_primal(build_states(2, 0.5), config1_table)
    with pytest.raises(DimensionError):
        assemble_dual(build_states(3, 0.5), config1_table, slack=np.zeros((2, 2)))


def test_lmi_block_shape_check(binary_table, binary_states):
    """H 形状错误时报错"""
    dual = assemble_dual(binary_states, binary_table)
    with pytest.raises(DimensionError):
        dual.lmi_blocks(np.zeros(4), np.zeros((3, 2, 2)))
    with pytest.raises(DimensionError):
        dual.nu_matrix(np.zeros(3))


def test_slack_enters_dual_objective(binary_table, binary_states):
    """对偶目标 -t·nu + s·|nu|"""
    slack = np.full((2, 2), 0.01)
    dual = assemble_dual(binary_states, binary_table, slack)
    nu = np.array([-1.0, 0.5, 0.0, 2.0])
    expected = -binary_table.p.reshape(-1) @ nu + 0.01 * np.abs(nu).sum()
    assert dual.objective(nu) == pytest.approx(expected)
