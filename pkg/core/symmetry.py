"""
对称约化模块

置换群 S_n 同时作用于输入 x 和前 n 个 (确定性) 输出, 其余输出保持不变。
对 S_n 对称的概率表, 只需每个策略轨道取一个代表, 数据约束按 (x, b) 轨道合并。
"""
from typing import Optional, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .assembly import (
    AssembledProblem,
    DualProblem,
    PrimalProblem,
    strategy_array,
    strategy_index,
)
from .config import settings
from .detection import ProbTable
from .exceptions import DimensionError, SymmetryError
from .logger import get_logger
from .states import StateFamily

logger = get_logger(__name__)


def _generators(n: int) -> list:
    """S_n 的生成元: 对换 (0 1) 与 n-轮换"""
    swap = np.arange(n)
    swap[[0, 1]] = [1, 0]
    cycle = (np.arange(n) + 1) % n
    if n == 2:
        return [swap]
    return [swap, cycle]


def _act(strategies: np.ndarray, perm: np.ndarray, d: int) -> np.ndarray:
    """(π·Λ)_{π(x)} = π(λ_x), 输出 b >= n 不动"""
    n = strategies.shape[1]
    outcome_map = np.arange(d)
    outcome_map[:n] = perm
    image = np.empty_like(strategies)
    image[:, perm] = outcome_map[strategies]
    return image


def strategy_orbits(n: int, d: int, cap: Optional[int] = None):
    """返回 (代表策略, 轨道大小), 代表取轨道中字典序最小者"""
    if d < n:
        raise SymmetryError(f"输出数 {d} 小于输入数 {n}, 置换不能作用于输出")
    strategies = strategy_array(n, d, cap or settings.SYMMETRY_CAP)
    total = strategies.shape[0]
    index = np.arange(total)

    rows, cols = [], []
    for perm in _generators(n):
        rows.append(index)
        cols.append(strategy_index(_act(strategies, perm, d), d))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(total, total))
    count, labels = connected_components(graph, directed=True, connection="weak")

    representative = np.full(count, total)
    np.minimum.at(representative, labels, index)
    sizes = np.bincount(labels, minlength=count)
    order = np.argsort(representative)
    return strategies[representative[order]], sizes[order].astype(float)


def outcome_classes(n: int, d: int) -> np.ndarray:
    """(x, b) 对的轨道编号: 0 为猜中, 1 为其他确定性输出, 2+f 为第 n+f 个固定输出"""
    x = np.arange(n)[:, None]
    b = np.arange(d)[None, :]
    classes = np.where(b == x, 0, 1)
    classes = np.where(b >= n, 2 + b - n, classes)
    return classes


def check_table_symmetry(table: ProbTable, tol: Optional[float] = None) -> float:
    """返回同一轨道内元素的最大差异; 超出容差时抛出 SymmetryError"""
    tol = settings.SYMMETRY_TOL if tol is None else tol
    if table.d < table.n:
        raise SymmetryError(f"输出数 {table.d} 小于输入数 {table.n}")
    classes = outcome_classes(table.n, table.d)
    spread = 0.0
    for c in range(int(classes.max()) + 1):
        values = table.p[classes == c]
        spread = max(spread, float(values.max() - values.min()))
    if spread > tol:
        raise SymmetryError(f"概率表不满足置换对称性, 轨道内最大差异 {spread:.3e} > {tol:.1e}")
    return spread


def _reduced_data(
    states: StateFamily, table: ProbTable, slack: Optional[np.ndarray], tol: Optional[float]
) -> dict:
    if states.n != table.n:
        raise DimensionError(f"态族输入数 {states.n} 与概率表输入数 {table.n} 不一致")
    n, d = table.n, table.d
    check_table_symmetry(table, tol)
    table_slack = np.zeros((n, d)) if slack is None else np.asarray(slack, dtype=float)
    if table_slack.shape != (n, d):
        raise DimensionError(f"松弛形状应为 ({n}, {d})")

    strategies, sizes = strategy_orbits(n, d)
    classes = outcome_classes(n, d)
    count = int(classes.max()) + 1
    weights = np.zeros((count, n, d))
    targets = np.zeros(count)
    reduced_slack = np.zeros(count)
    unit_shift = np.zeros(count)
    for c in range(count):
        mask = classes == c
        size = int(mask.sum())
        weights[c][mask] = 1.0 / size
        targets[c] = table.p[mask].mean()
        reduced_slack[c] = table_slack[mask].mean()
        unit_shift[c] = size

    logger.info("对称约化完成", n=n, d=d, strategies=d ** n, orbits=len(sizes), classes=count)
    return dict(
        n=n,
        d=d,
        states=states,
        target=table,
        table_slack=table_slack,
        strategies=strategies,
        multiplicities=sizes,
        weights=weights,
        targets=targets,
        slack=reduced_slack,
        unit_shift=unit_shift,
        reduced=True,
    )


def assemble_reduced(
    states: StateFamily,
    table: ProbTable,
    slack: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
):
    """直接组装约化后的 (原问题, 对偶问题)"""
    data = _reduced_data(states, table, slack, tol)
    return PrimalProblem(**data), DualProblem(**data)


def reduce_by_symmetry(
    problem: Union[PrimalProblem, DualProblem], tol: Optional[float] = None
) -> AssembledProblem:
    """将已组装的完整问题约化; 返回同类型的约化问题"""
    if problem.reduced:
        return problem
    data = _reduced_data(problem.states, problem.target, problem.table_slack, tol)
    return type(problem)(**data)


__all__ = [
    "assemble_reduced",
    "check_table_symmetry",
    "outcome_classes",
    "reduce_by_symmetry",
    "strategy_orbits",
]
