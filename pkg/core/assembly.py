"""
SDP 组装模块

枚举对手策略 Λ=(λ_0,…,λ_{n-1}), 由态族和概率表组装原问题与对偶问题。
约化问题 (core.symmetry) 使用同一数据结构: 每个代表策略带有轨道重数,
数据约束由权重张量 A[c, x, b] 给出。
"""
import itertools
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import sparse

from .config import settings
from .detection import ProbTable
from .exceptions import DimensionError, DomainError, StrategyLimitError
from .logger import get_logger
from .states import StateFamily

logger = get_logger(__name__)

Strategy = Tuple[int, ...]

MAX_INPUTS = 8
MAX_OUTCOMES = 12


def _check_strategy_space(n: int, d: int, cap: int) -> None:
    if not 1 <= n <= MAX_INPUTS:
        raise DomainError(f"输入数必须在1-{MAX_INPUTS}之间: {n}")
    if not 2 <= d <= MAX_OUTCOMES:
        raise DomainError(f"输出数必须在2-{MAX_OUTCOMES}之间: {d}")
    if d ** n > cap:
        raise StrategyLimitError(n, d, cap)


def enumerate_strategies(n: int, d: int, cap: Optional[int] = None) -> List[Strategy]:
    """按字典序枚举全部 d^n 个策略"""
    _check_strategy_space(n, d, cap or settings.STRATEGY_CAP)
    return list(itertools.product(range(d), repeat=n))


def strategy_array(n: int, d: int, cap: Optional[int] = None) -> np.ndarray:
    """策略的数组形式, 形状 (d^n, n), 行按字典序排列"""
    _check_strategy_space(n, d, cap or settings.STRATEGY_CAP)
    return np.indices((d,) * n).reshape(n, -1).T.copy()


def strategy_index(strategies: np.ndarray, d: int) -> np.ndarray:
    """策略在字典序中的位置"""
    n = strategies.shape[1]
    powers = d ** np.arange(n - 1, -1, -1)
    return strategies @ powers


def _frozen(v):
    v = np.array(v, dtype=float)
    v.setflags(write=False)
    return v


class AssembledProblem(BaseModel):
    """原问题与对偶问题共享的数据

    strategies[k] 为第 k 个 (代表) 策略, multiplicities[k] 为其轨道大小;
    第 c 个数据约束为 sum_k m_k sum_{x,b} A[c,x,b] <psi_x|M_b^k|psi_x> = targets[c],
    允许 |偏差| <= slack[c]。unit_shift 满足 sum_c unit_shift[c] A[c] = 全1。
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(ge=1)
    d: int = Field(ge=2)
    states: StateFamily
    target: ProbTable
    table_slack: np.ndarray
    strategies: np.ndarray
    multiplicities: np.ndarray
    weights: np.ndarray
    targets: np.ndarray
    slack: np.ndarray
    unit_shift: np.ndarray
    reduced: bool = False

    @field_validator("table_slack", "multiplicities", "weights", "targets", "slack", "unit_shift", mode="before")
    @classmethod
    def freeze_float(cls, v):
        return _frozen(v)

    @field_validator("strategies", mode="before")
    @classmethod
    def freeze_strategies(cls, v):
        v = np.array(v, dtype=np.int64)
        v.setflags(write=False)
        return v

    @model_validator(mode="after")
    def check_dimensions(self) -> "AssembledProblem":
        n, d = self.n, self.d
        k = self.strategies.shape[0]
        c = self.weights.shape[0]
        if self.strategies.shape != (k, n) or self.multiplicities.shape != (k,):
            raise ValueError("策略数组与重数维度不一致")
        if self.weights.shape != (c, n, d):
            raise ValueError("约束权重维度应为 (C, n, d)")
        if self.targets.shape != (c,) or self.slack.shape != (c,) or self.unit_shift.shape != (c,):
            raise ValueError("约束目标/松弛/单位平移维度不一致")
        if self.table_slack.shape != (n, d):
            raise ValueError("表松弛维度应为 (n, d)")
        return self

    @property
    def strategy_count(self) -> int:
        return int(self.strategies.shape[0])

    @property
    def constraint_count(self) -> int:
        return int(self.weights.shape[0])

    @property
    def block_count(self) -> int:
        """PSD 块 (Λ, b) 的个数"""
        return self.strategy_count * self.d

    def strategy_list(self) -> List[Strategy]:
        return [tuple(int(v) for v in row) for row in self.strategies]

    def projectors(self) -> np.ndarray:
        return self.states.projectors()

    def guess_indicator(self) -> np.ndarray:
        """G[k, x, b] = 1 当 λ_x = b"""
        return (self.strategies[:, :, None] == np.arange(self.d)[None, None, :]).astype(float)

    def objective_coefficients(self) -> np.ndarray:
        """目标函数在 <psi_x|M_b^k|psi_x> 上的系数, 形状 (K, d, n)"""
        g = self.guess_indicator().transpose(0, 2, 1)
        return g * (self.multiplicities[:, None, None] / self.n)

    def data_matrix(self) -> sparse.csr_matrix:
        """数据约束矩阵, 列按 (k, b, x) 排列"""
        coeff = np.einsum("k,cxb->ckbx", self.multiplicities, self.weights)
        return sparse.csr_matrix(coeff.reshape(self.constraint_count, -1))

    def same_structure(self, other: "AssembledProblem") -> bool:
        return (
            self.n == other.n
            and self.d == other.d
            and self.reduced == other.reduced
            and np.array_equal(self.strategies, other.strategies)
            and np.array_equal(self.weights, other.weights)
        )


class PrimalProblem(AssembledProblem):
    """原问题: 最大化 (1/n) sum_x sum_Λ <psi_x|M_{λ_x}^Λ|psi_x>"""

    def _overlaps(self, m: np.ndarray) -> np.ndarray:
        """<psi_x|M_b^k|psi_x>, 形状 (K, d, n)"""
        m = np.asarray(m, dtype=float)
        expected = (self.strategy_count, self.d, self.n, self.n)
        if m.shape != expected:
            raise DimensionError(f"原变量形状应为 {expected}, 实际 {m.shape}")
        v = self.states.vectors
        return np.einsum("xi,kbij,xj->kbx", v, m, v)

    def evaluate_objective(self, m: np.ndarray) -> float:
        """给定原变量时的目标值"""
        return float(np.sum(self.objective_coefficients() * self._overlaps(m)))

    def data_residuals(self, m: np.ndarray) -> np.ndarray:
        """数据约束残差 (未计松弛)"""
        q = self._overlaps(m).reshape(-1)
        return self.data_matrix() @ q - self.targets

    def normalization_residuals(self, m: np.ndarray) -> np.ndarray:
        """sum_b M_b^k - (1/n) tr(sum_b M_b^k) I 的最大绝对值"""
        total = np.asarray(m).sum(axis=1)
        trace = np.trace(total, axis1=1, axis2=2)
        diff = total - trace[:, None, None] / self.n * np.eye(self.n)
        return np.abs(diff).max(axis=(1, 2))


class DualProblem(AssembledProblem):
    """对偶问题: 最小化 -sum_c nu_c t_c + sum_c |nu_c| s_c, 每个 (Λ, b) 一个 LMI 块"""

    def nu_matrix(self, nu: np.ndarray) -> np.ndarray:
        """展开为 (n, d) 的 nu_bx"""
        nu = np.asarray(nu, dtype=float)
        if nu.shape != (self.constraint_count,):
            raise DimensionError(f"nu 形状应为 ({self.constraint_count},), 实际 {nu.shape}")
        return np.einsum("c,cxb->xb", nu, self.weights)

    def constant_blocks(self) -> np.ndarray:
        """(1/n) sum_x δ_{λ_x,b} rho_x, 形状 (K, d, n, n)"""
        return np.einsum("kxb,xij->kbij", self.guess_indicator(), self.projectors()) / self.n

    def lmi_blocks(self, nu: np.ndarray, h: np.ndarray) -> np.ndarray:
        """J_b^Λ = sum_x rho_x((1/n)δ_{λ_x,b} + nu_bx) + H^Λ - (1/n)tr[H^Λ] I"""
        h = np.asarray(h, dtype=float)
        expected = (self.strategy_count, self.n, self.n)
        if h.shape != expected:
            raise DimensionError(f"H 形状应为 {expected}, 实际 {h.shape}")
        h = 0.5 * (h + h.transpose(0, 2, 1))
        nu_xb = self.nu_matrix(nu)
        shift = np.einsum("xb,xij->bij", nu_xb, self.projectors())
        trace = np.trace(h, axis1=1, axis2=2)
        traceless = h - trace[:, None, None] / self.n * np.eye(self.n)
        return self.constant_blocks() + shift[None, :, :, :] + traceless[:, None, :, :]

    def objective(self, nu: np.ndarray) -> float:
        """对偶目标值 (松弛为零时即 -sum nu_bx p(b|x))"""
        nu = np.asarray(nu, dtype=float)
        return float(-self.targets @ nu + self.slack @ np.abs(nu))


def _full_data(states: StateFamily, table: ProbTable, slack: Optional[np.ndarray]) -> dict:
    if states.n != table.n:
        raise DimensionError(f"态族输入数 {states.n} 与概率表输入数 {table.n} 不一致")
    n, d = table.n, table.d
    table_slack = np.zeros((n, d)) if slack is None else np.asarray(slack, dtype=float)
    if table_slack.shape != (n, d):
        raise DimensionError(f"松弛形状应为 ({n}, {d})")

    strategies = strategy_array(n, d)
    weights = np.zeros((n * d, n, d))
    for x in range(n):
        for b in range(d):
            weights[x * d + b, x, b] = 1.0
    return dict(
        n=n,
        d=d,
        states=states,
        target=table,
        table_slack=table_slack,
        strategies=strategies,
        multiplicities=np.ones(strategies.shape[0]),
        weights=weights,
        targets=table.p.reshape(-1),
        slack=table_slack.reshape(-1),
        unit_shift=np.ones(n * d),
        reduced=False,
    )


def assemble_primal(states: StateFamily, table: ProbTable, slack: Optional[np.ndarray] = None) -> PrimalProblem:
    """组装原问题"""
    problem = PrimalProblem(**_full_data(states, table, slack))
    logger.debug("组装原问题", n=problem.n, d=problem.d, blocks=problem.block_count)
    return problem


def assemble_dual(states: StateFamily, table: ProbTable, slack: Optional[np.ndarray] = None) -> DualProblem:
    """组装对偶问题"""
    problem = DualProblem(**_full_data(states, table, slack))
    logger.debug("组装对偶问题", n=problem.n, d=problem.d, blocks=problem.block_count)
    return problem
