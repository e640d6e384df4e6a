"""
SDP 求解引擎

用 cvxpy 求解原问题 (诊断用) 与对偶问题 (认证用)。报告的猜测概率只来自对偶侧:
对偶候选解在 numpy 中重新检查每个 LMI 块的最大特征值, 必要时沿单位方向平移修复,
通过检查后才作为证书使用。
"""
import hashlib
import json
import math
import time
from enum import Enum
from typing import List, Optional, Tuple

import cvxpy as cp
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .assembly import AssembledProblem, DualProblem, PrimalProblem
from .config import settings
from .exceptions import CertificationError, DimensionError
from .logger import get_logger

logger = get_logger(__name__)

# SCS 为一阶方法, 迭代预算按此倍数放大
SCS_ITER_FACTOR = 100
# 重试时容差放宽的倍数
FALLBACK_RELAX = 100.0
MIN_FRAME_EIGENVALUE = 1e-12
TRIVIAL_SLACK = 1e-9


class SolveStatus(str, Enum):
    """求解状态"""
    OPTIMAL = "Optimal"
    MAX_ITERS = "MaxIters"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


class SolveOptions(BaseModel):
    """求解选项"""
    model_config = ConfigDict(frozen=True)

    gap_tol: float = Field(default_factory=lambda: settings.GAP_TOL, gt=0.0)
    feas_tol: float = Field(default_factory=lambda: settings.FEAS_TOL, gt=0.0)
    max_iters: int = Field(default_factory=lambda: settings.MAX_ITERS, ge=1)
    solver: str = Field(default_factory=lambda: settings.SOLVER)
    solve_primal: bool = Field(default=True, description="是否同时求解原问题以报告对偶间隙")
    cert_margin: float = Field(default_factory=lambda: settings.CERT_MARGIN, gt=0.0)
    duality_tol: float = Field(
        default_factory=lambda: settings.DUALITY_TOL, gt=0.0,
        description="原问题值与认证上界之差的容许量, 超出时不报告 Optimal",
    )
    fallback: bool = Field(default=True, description="未达到 Optimal 时按重试阶梯再求解")

    @field_validator("solver")
    @classmethod
    def validate_solver(cls, v: str) -> str:
        v = v.upper()
        if v not in ("CLARABEL", "SCS"):
            raise ValueError(f"不支持的求解器: {v}")
        return v

    def solver_kwargs(self) -> dict:
        """映射为求解器自身的参数名"""
        if self.solver == "SCS":
            return {
                "max_iters": self.max_iters * SCS_ITER_FACTOR,
                "eps_abs": self.gap_tol,
                "eps_rel": self.gap_tol,
            }
        return {
            "max_iter": self.max_iters,
            "tol_gap_abs": self.gap_tol,
            "tol_gap_rel": self.gap_tol,
            "tol_feas": self.feas_tol,
        }

    def fallbacks(self) -> List["SolveOptions"]:
        """重试阶梯: 原选项, 放宽容差并加倍迭代, 换用另一个求解器"""
        if not self.fallback:
            return [self]
        relaxed = self.model_copy(update={
            "gap_tol": self.gap_tol * FALLBACK_RELAX,
            "feas_tol": self.feas_tol * FALLBACK_RELAX,
            "max_iters": self.max_iters * 2,
        })
        other = relaxed.model_copy(update={"solver": "SCS" if self.solver == "CLARABEL" else "CLARABEL"})
        return [self, relaxed, other]


class DualCertificate(BaseModel):
    """对偶证书: 满足全部 LMI 的 (nu, H) 及其上下文"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int
    d: int
    reduced: bool = False
    nu: np.ndarray
    H: np.ndarray
    unit_shift: np.ndarray
    mu: Optional[float] = None
    delta_model: Optional[str] = None
    delta: Optional[float] = None
    table_hash: Optional[str] = None
    energy_checked: Optional[bool] = None

    @field_validator("nu", "H", "unit_shift", mode="before")
    @classmethod
    def freeze_array(cls, v):
        v = np.array(v, dtype=float)
        v.setflags(write=False)
        return v

    def with_context(self, **context) -> "DualCertificate":
        return self.model_copy(update=context)

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "n": self.n,
            "d": self.d,
            "reduced": self.reduced,
            "nu": self.nu.tolist(),
            "H": self.H.tolist(),
            "unit_shift": self.unit_shift.tolist(),
            "mu": self.mu,
            "delta_model": self.delta_model,
            "delta": self.delta,
            "table_hash": self.table_hash,
            "energy_checked": self.energy_checked,
        }

    def digest(self) -> str:
        payload = json.dumps(self.to_json_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


class CertifiedBound(BaseModel):
    """通过检查的对偶上界"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: float
    certificate: DualCertificate
    worst_eigenvalue: float
    repaired: bool = False
    shift: float = 0.0


class Solution(BaseModel):
    """一次求解的结果"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: float = Field(description="经认证的猜测概率上界")
    status: SolveStatus
    primal_value: Optional[float] = None
    dual_value: Optional[float] = None
    gap: Optional[float] = None
    dual_certificate: Optional[DualCertificate] = None
    repaired: bool = False
    worst_eigenvalue: Optional[float] = None
    solve_time: float = 0.0
    message: Optional[str] = None
    attempts: int = Field(default=1, description="重试阶梯中实际求解的次数")


def repair_dual(
    candidate: DualCertificate, violation: float, frame_min_eigenvalue: float
) -> Tuple[DualCertificate, float]:
    """沿 -unit_shift 平移 nu, 使每个块减去 s·sum_x rho_x

    s = violation / λ_min(sum_x rho_x); 对偶目标增加 s·sum_c unit_shift_c t_c = n·s。
    violation <= 0 或框架奇异时原样返回。
    """
    if violation <= 0.0 or frame_min_eigenvalue <= MIN_FRAME_EIGENVALUE:
        return candidate, 0.0
    shift = violation / frame_min_eigenvalue
    nu = candidate.nu - shift * candidate.unit_shift
    return candidate.model_copy(update={"nu": nu}), shift


def _worst_eigenvalue(dual: DualProblem, certificate: DualCertificate) -> float:
    blocks = dual.lmi_blocks(certificate.nu, certificate.H)
    if not np.all(np.isfinite(blocks)):
        return math.inf
    return float(np.linalg.eigvalsh(blocks).max())


def certify_dual_bound(
    dual: DualProblem,
    candidate: DualCertificate,
    margin: Optional[float] = None,
) -> CertifiedBound:
    """用 numpy 独立检查候选 (nu, H); 不满足时修复一次并复检, 仍不满足则拒绝"""
    margin = settings.CERT_MARGIN if margin is None else margin
    if candidate.n != dual.n or candidate.d != dual.d or candidate.reduced != dual.reduced:
        raise DimensionError("证书与对偶问题的维度不一致")
    if candidate.nu.shape != (dual.constraint_count,):
        raise DimensionError(f"nu 形状应为 ({dual.constraint_count},)")
    if candidate.H.shape != (dual.strategy_count, dual.n, dual.n):
        raise DimensionError(f"H 形状应为 ({dual.strategy_count}, {dual.n}, {dual.n})")
    if not (np.all(np.isfinite(candidate.nu)) and np.all(np.isfinite(candidate.H))):
        raise CertificationError("证书包含非有限数值")

    worst = _worst_eigenvalue(dual, candidate)
    if not math.isfinite(worst):
        raise CertificationError("LMI 块包含非有限数值")

    certificate = candidate
    shift = 0.0
    if worst + margin > 0.0:
        frame = dual.states.frame_min_eigenvalue()
        if frame <= MIN_FRAME_EIGENVALUE:
            raise CertificationError(
                f"态族框架奇异 (λ_min={frame:.3e}), 无法修复违反量 {worst:.3e}", worst_eigenvalue=worst
            )
        certificate, shift = repair_dual(candidate, worst + 2.0 * margin, frame)
        worst = _worst_eigenvalue(dual, certificate)
        if not math.isfinite(worst) or worst + margin > 0.0:
            raise CertificationError(f"修复后仍违反 LMI: 最大特征值 {worst:.3e}", worst_eigenvalue=worst)
        logger.debug("对偶解已修复", shift=shift, worst_eigenvalue=worst)

    value = dual.objective(certificate.nu)
    if not math.isfinite(value):
        raise CertificationError("对偶目标值非有限")
    return CertifiedBound(
        value=value,
        certificate=certificate,
        worst_eigenvalue=worst,
        repaired=shift > 0.0,
        shift=shift,
    )


def trivial_certificate(dual: DualProblem, tau: float = TRIVIAL_SLACK) -> DualCertificate:
    """nu = -(1+τ)unit_shift/n: 对任意数据给出上界 1+τ (加松弛项)

    全同态时 sum_x rho_x 只在 e0 方向非零, 其正交补由 H = -τ(I - e0 e0^T) 压到负半轴。
    """
    n = dual.n
    h = np.zeros((dual.strategy_count, n, n))
    if dual.states.delta == 1.0:
        complement = np.eye(n)
        complement[0, 0] = 0.0
        h[:] = -tau * complement
    return DualCertificate(
        n=n,
        d=dual.d,
        reduced=dual.reduced,
        nu=-(1.0 + tau) * dual.unit_shift / n,
        H=h,
        unit_shift=dual.unit_shift,
    )


def _map_status(status: Optional[str]) -> SolveStatus:
    if status == cp.OPTIMAL:
        return SolveStatus.OPTIMAL
    if status in (cp.OPTIMAL_INACCURATE, cp.USER_LIMIT):
        return SolveStatus.MAX_ITERS
    if status in (cp.INFEASIBLE, cp.UNBOUNDED, cp.INFEASIBLE_INACCURATE, cp.UNBOUNDED_INACCURATE):
        return SolveStatus.INFEASIBLE
    return SolveStatus.NUMERICAL_FAILURE


def _run(problem: cp.Problem, options: SolveOptions) -> SolveStatus:
    try:
        problem.solve(solver=options.solver, **options.solver_kwargs())
    except cp.SolverError as e:
        logger.warning("求解器失败", solver=options.solver, error=str(e))
        return SolveStatus.NUMERICAL_FAILURE
    return _map_status(problem.status)


def _vec_matrix(projectors: np.ndarray) -> np.ndarray:
    """行 x 为 vec(rho_x), 与 cp.reshape(order='F') 一致"""
    n = projectors.shape[0]
    return np.stack([projectors[x].reshape(-1, order="F") for x in range(n)])


def _gauge_fixed(problem: AssembledProblem) -> bool:
    """完整问题且无松弛时, 每行数据和为1使部分约束线性相关"""
    return not problem.reduced and not np.any(problem.slack > 0.0)


def build_primal_model(primal: PrimalProblem) -> Tuple[cp.Problem, List[List[cp.Variable]]]:
    """构造 cvxpy 原问题, 返回 (问题, M[k][b])

    归一化的 n 个对角方程之和恒为零, 只保留前 n-1 个; 完整等式问题中 x >= 1 的最后一个
    输出由归一化与行和推出, 也不进入模型。
    """
    n, d = primal.n, primal.d
    rho = _vec_matrix(primal.projectors())
    m = [[cp.Variable((n, n), PSD=True) for _ in range(d)] for _ in range(primal.strategy_count)]

    overlaps = cp.hstack([rho @ cp.reshape(m[k][b], (n * n,), order="F") for k in range(len(m)) for b in range(d)])
    objective = cp.Maximize(primal.objective_coefficients().reshape(-1) @ overlaps)

    rows = np.arange(primal.constraint_count)
    if _gauge_fixed(primal):
        rows = rows[(rows < d) | (rows % d != d - 1)]
    data = primal.data_matrix()[rows] @ overlaps
    targets = primal.targets[rows]
    constraints = []
    if np.any(primal.slack > 0.0):
        constraints.append(cp.abs(data - targets) <= primal.slack[rows])
    else:
        constraints.append(data == targets)
    for row in m:
        total = sum(row)
        constraints.append(cp.diag(total)[: n - 1] == cp.trace(total) / n)
        constraints.append(cp.upper_tri(total) == 0)
    return cp.Problem(objective, constraints), m


def build_dual_model(dual: DualProblem) -> Tuple[cp.Problem, cp.Variable, List[cp.Variable]]:
    """构造 cvxpy 对偶问题, 返回 (问题, nu, H[k])

    H^Λ 直接取无迹矩阵。完整等式问题中 nu_bx -> nu_bx + c_x (sum_x c_x = 0) 不改变目标与
    LMI, 固定各输入的 sum_b nu_bx 相等以消去该自由度。
    """
    n, d = dual.n, dual.d
    rho = dual.projectors()
    nu = cp.Variable(dual.constraint_count)
    h = [cp.Variable((n, n), symmetric=True) for _ in range(dual.strategy_count)]

    # nu_xb[x][b] = sum_c nu_c A[c, x, b]
    weights = dual.weights.reshape(dual.constraint_count, -1)
    nu_xb = weights.T @ nu
    shift = [sum(nu_xb[x * d + b] * rho[x] for x in range(n)) for b in range(d)]
    constant = dual.constant_blocks()

    constraints = []
    for k, hk in enumerate(h):
        constraints.append(cp.trace(hk) == 0)
        for b in range(d):
            constraints.append(shift[b] + hk + constant[k, b] << 0)
    if _gauge_fixed(dual):
        row_sums = dual.weights.sum(axis=2).T @ nu
        constraints.append(row_sums[1:] == row_sums[0])

    objective = -dual.targets @ nu
    if np.any(dual.slack > 0.0):
        objective = objective + dual.slack @ cp.abs(nu)
    return cp.Problem(cp.Minimize(objective), constraints), nu, h


def _shortcut(dual: DualProblem) -> bool:
    """δ = 0 或 δ = 1 时猜测概率平凡为 1"""
    return dual.states.delta in (0.0, 1.0)


def _solve_primal(primal: PrimalProblem, options: SolveOptions) -> Tuple[SolveStatus, Optional[float]]:
    primal_model, _ = build_primal_model(primal)
    status = _run(primal_model, options)
    if status in (SolveStatus.OPTIMAL, SolveStatus.MAX_ITERS) and primal_model.value is not None:
        return status, float(primal_model.value)
    return status, None


def _solve_once(primal: PrimalProblem, dual: DualProblem, options: SolveOptions, start: float) -> Solution:
    """按一组选项求解一次; 原问题值高于认证上界时以原问题值为准并降级"""
    primal_value = None
    primal_status = None
    if options.solve_primal:
        primal_status, primal_value = _solve_primal(primal, options)
        if primal_status is SolveStatus.INFEASIBLE:
            logger.warning("原问题不可行: 观测数据与态族假设不相容", solver=options.solver)
            return Solution(value=1.0, status=SolveStatus.INFEASIBLE, solve_time=time.time() - start,
                            message="原问题不可行")

    dual_model, nu, h = build_dual_model(dual)
    dual_status = _run(dual_model, options)
    if dual_status in (SolveStatus.INFEASIBLE, SolveStatus.NUMERICAL_FAILURE) or nu.value is None:
        logger.warning("对偶问题未得到可用解", status=dual_status.value, solver=options.solver)
        return Solution(value=1.0, status=dual_status, primal_value=primal_value,
                        solve_time=time.time() - start, message="对偶问题无可用解")

    candidate = DualCertificate(
        n=dual.n,
        d=dual.d,
        reduced=dual.reduced,
        nu=np.asarray(nu.value, dtype=float),
        H=np.stack([np.asarray(hk.value, dtype=float) for hk in h]),
        unit_shift=dual.unit_shift,
    )
    try:
        bound = certify_dual_bound(dual, candidate, options.cert_margin)
    except CertificationError as e:
        logger.error("对偶证书被拒绝", error=str(e), worst_eigenvalue=e.worst_eigenvalue)
        return Solution(value=1.0, status=SolveStatus.NUMERICAL_FAILURE, primal_value=primal_value,
                        dual_value=float(dual_model.value), worst_eigenvalue=e.worst_eigenvalue,
                        solve_time=time.time() - start, message=str(e))

    dual_value = float(dual_model.value)
    value = bound.value
    gap = None if primal_value is None else value - primal_value
    status = dual_status
    message = None
    if gap is not None and abs(gap) > options.duality_tol:
        status = SolveStatus.MAX_ITERS
    if primal_status is SolveStatus.MAX_ITERS:
        status = SolveStatus.MAX_ITERS
    if gap is not None and gap < -options.duality_tol:
        message = f"认证上界 {value:.8g} 低于原问题值 {primal_value:.8g}, 改用原问题值"
        logger.warning("弱对偶被违反, 改用原问题值", dual=value, primal=primal_value, solver=options.solver)
        value = primal_value

    return Solution(
        value=min(1.0, value),
        status=status,
        primal_value=primal_value,
        dual_value=dual_value,
        gap=gap,
        dual_certificate=bound.certificate,
        repaired=bound.repaired,
        worst_eigenvalue=bound.worst_eigenvalue,
        solve_time=time.time() - start,
        message=message,
    )


def _preference(solution: Solution) -> Tuple[int, float]:
    """有证书者优先, 其中取上界最小者"""
    return (0 if solution.dual_certificate is not None else 1, solution.value)


def solve(primal: PrimalProblem, dual: DualProblem, options: Optional[SolveOptions] = None) -> Solution:
    """求解并认证; value 来自通过检查的对偶解, 且不低于原问题值"""
    options = options or SolveOptions()
    if not primal.same_structure(dual):
        raise DimensionError("原问题与对偶问题的结构不一致")
    start = time.time()

    if _shortcut(dual):
        return _solve_trivial(primal, dual, options, start)

    attempts: List[Solution] = []
    for attempt in options.fallbacks():
        solution = _solve_once(primal, dual, attempt, start)
        attempts.append(solution)
        if solution.status in (SolveStatus.OPTIMAL, SolveStatus.INFEASIBLE):
            break
        logger.info("求解未达到 Optimal, 尝试下一组选项", status=solution.status.value,
                    solver=attempt.solver, gap_tol=attempt.gap_tol)

    solution = attempts[-1]
    if solution.status is not SolveStatus.OPTIMAL and solution.status is not SolveStatus.INFEASIBLE:
        solution = min(attempts, key=_preference)
    solution = solution.model_copy(update={"attempts": len(attempts), "solve_time": time.time() - start})
    logger.info(
        "SDP 求解完成",
        status=solution.status.value,
        value=solution.value,
        primal=solution.primal_value,
        dual=solution.dual_value,
        repaired=solution.repaired,
        reduced=dual.reduced,
        attempts=len(attempts),
        seconds=round(solution.solve_time, 3),
    )
    return solution


def _solve_trivial(primal: PrimalProblem, dual: DualProblem, options: SolveOptions, start: float) -> Solution:
    delta = dual.states.delta
    if delta == 1.0:
        # 全同态: 只有各行相同 (在松弛内) 的表才可行
        p = dual.target.p
        spread = np.abs(p - p.mean(axis=0, keepdims=True))
        if np.any(spread > 2.0 * dual.table_slack + options.feas_tol):
            logger.warning("全同态下概率表各行不一致, 原问题不可行")
            return Solution(value=1.0, status=SolveStatus.INFEASIBLE, solve_time=time.time() - start,
                            message="全同态下各行必须相同")
    bound = certify_dual_bound(dual, trivial_certificate(dual), options.cert_margin)
    logger.info("平凡情形, 猜测概率为1", delta=delta)
    return Solution(
        value=min(1.0, bound.value),
        status=SolveStatus.OPTIMAL,
        primal_value=1.0 if options.solve_primal else None,
        dual_value=bound.value,
        gap=0.0 if options.solve_primal else None,
        dual_certificate=bound.certificate,
        worst_eigenvalue=bound.worst_eigenvalue,
        solve_time=time.time() - start,
    )
