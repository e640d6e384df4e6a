"""
认证模块

猜测概率上界 -> 最小熵, μ/η/n 扫描, 最优 μ 搜索。
认证失败一律按零熵报告 (p_guess = 1), 从不给出未经证书支持的数值。
"""
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .assembly import assemble_dual, assemble_primal
from .config import settings
from .detection import ExperimentParams, ProbTable, model_table
from .engine import (
    DualCertificate,
    SolveOptions,
    SolveStatus,
    certify_dual_bound,
    solve,
)
from .exceptions import CertificationError, DomainError, QrngError, SymmetryError
from .logger import get_logger
from .monitor import check_energy_bound, simulate_power_records
from .states import OverlapKind, OverlapModel, build_states
from .symmetry import assemble_reduced

logger = get_logger(__name__)

DETERMINISTIC_TOL = 1e-9
DEFAULT_BRACKETS = {OverlapKind.ENERGY: (0.0, 0.5), OverlapKind.OVERLAP: (0.0, 3.0)}
PRESCAN_POINTS = 10
FALLBACK_POINTS = 41
UNIMODAL_TOL = 1e-9
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def hmin_from_pguess(p: float) -> float:
    """H_min = -log2(P_g)"""
    if not (0.0 < p <= 1.0):
        raise DomainError(f"猜测概率必须在(0,1]之间: {p}")
    if p == 1.0:
        return 0.0
    return -math.log2(p)


class CertResult(BaseModel):
    """一次认证的结果"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    p_guess: float = Field(gt=0.0, le=1.0)
    h_min: float = Field(ge=0.0, description="每次测量的比特数")
    mu: float
    model: OverlapKind
    delta: float
    slack_used: float = 0.0
    status: SolveStatus
    primal_value: Optional[float] = None
    dual_value: Optional[float] = None
    gap: Optional[float] = None
    reduced: bool = False
    repaired: bool = False
    certificate_hash: Optional[str] = None
    error: Optional[str] = None
    certificate: Optional[DualCertificate] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def check_entropy(self) -> "CertResult":
        if abs(self.h_min - hmin_from_pguess(self.p_guess)) > 1e-12:
            raise ValueError("h_min 与 p_guess 不一致")
        return self

    @property
    def certified(self) -> bool:
        """是否有通过检查的证书支持"""
        return self.error is None and self.status in (SolveStatus.OPTIMAL, SolveStatus.MAX_ITERS)


def _fail_closed(
    mu: float, overlap: Optional[OverlapModel], kind: OverlapKind, status: SolveStatus,
    message: str, slack_used: float = 0.0, **extra,
) -> CertResult:
    logger.error("认证失败, 按零熵报告", mu=mu, status=status.value, error=message)
    return CertResult(
        p_guess=1.0,
        h_min=0.0,
        mu=mu,
        model=kind,
        delta=overlap.delta if overlap else float("nan"),
        slack_used=slack_used,
        status=status,
        error=message,
        **extra,
    )


def _assemble(states, table: ProbTable, slack: np.ndarray, use_symmetry: bool):
    if use_symmetry:
        try:
            return assemble_reduced(states, table, slack)
        except SymmetryError as e:
            logger.warning("对称约化被拒绝, 使用完整问题", reason=str(e))
    return assemble_primal(states, table, slack), assemble_dual(states, table, slack)


def _table_slack(table: ProbTable, slack_sigma: Optional[float]) -> np.ndarray:
    sigma = settings.SLACK_SIGMA if slack_sigma is None else slack_sigma
    return table.slack(sigma)


def _deterministic_floor(table: ProbTable, slack: np.ndarray) -> float:
    """数据允许范围内对手确定性策略至少能达到的猜测概率"""
    return float(np.clip(table.p - slack, 0.0, 1.0).max(axis=1).mean())


def certify(
    table: ProbTable,
    mu: float,
    model_kind: OverlapKind,
    options: Optional[SolveOptions] = None,
    slack_sigma: Optional[float] = None,
    use_symmetry: bool = False,
) -> CertResult:
    """overlap_from_model -> build_states -> 组装 -> solve -> 证书值 -> h_min"""
    model_kind = OverlapKind(model_kind)
    overlap = OverlapModel.from_mu(model_kind, mu)
    slack = _table_slack(table, slack_sigma)
    slack_used = float(slack.max())

    states = build_states(table.n, overlap.delta)
    primal, dual = _assemble(states, table, slack, use_symmetry)
    solution = solve(primal, dual, options)

    extra = dict(
        primal_value=solution.primal_value,
        dual_value=solution.dual_value,
        gap=solution.gap,
        reduced=dual.reduced,
    )
    if solution.dual_certificate is None or solution.status in (
        SolveStatus.INFEASIBLE,
        SolveStatus.NUMERICAL_FAILURE,
    ):
        return _fail_closed(mu, overlap, model_kind, solution.status,
                            solution.message or "没有可用的对偶证书", slack_used, **extra)

    return _finish(table, mu, overlap, model_kind, solution.value, solution.status,
                   solution.dual_certificate, slack, repaired=solution.repaired, **extra)


def _finish(
    table: ProbTable, mu: float, overlap: OverlapModel, kind: OverlapKind, value: float,
    status: SolveStatus, certificate: DualCertificate, slack: np.ndarray, **extra,
) -> CertResult:
    slack_used = float(slack.max())
    floor = _deterministic_floor(table, slack)
    if value < floor - DETERMINISTIC_TOL:
        return _fail_closed(
            mu, overlap, kind, SolveStatus.INFEASIBLE,
            f"认证值 {value:.6g} 低于确定性策略下界 {floor:.6g}, 数据与假设不相容", slack_used, **extra,
        )
    if not value > 0.0:
        return _fail_closed(mu, overlap, kind, SolveStatus.NUMERICAL_FAILURE, "认证值非正", slack_used, **extra)

    p_guess = min(1.0, value)
    certificate = certificate.with_context(
        mu=mu, delta_model=kind.value, delta=overlap.delta, table_hash=table.digest()
    )
    result = CertResult(
        p_guess=p_guess,
        h_min=hmin_from_pguess(p_guess),
        mu=mu,
        model=kind,
        delta=overlap.delta,
        slack_used=slack_used,
        status=status,
        certificate_hash=certificate.digest(),
        certificate=certificate,
        **extra,
    )
    logger.info("认证完成", mu=mu, model=kind.value, p_guess=p_guess, h_min=result.h_min, status=status.value)
    return result


def evaluate_certificate(
    table: ProbTable,
    certificate: DualCertificate,
    slack_sigma: Optional[float] = None,
) -> CertResult:
    """不重新求解, 用已保存的对偶证书给新表定界

    证书的 LMI 只依赖态族, 对任意同维度的表都是可行对偶点; 目标值随表线性变化。
    """
    if certificate.mu is None or certificate.delta_model is None:
        raise CertificationError("证书缺少 mu 或 delta_model")
    kind = OverlapKind(certificate.delta_model)
    mu = float(certificate.mu)
    overlap = OverlapModel.from_mu(kind, mu)
    slack = _table_slack(table, slack_sigma)

    states = build_states(table.n, overlap.delta)
    if certificate.reduced:
        _, dual = assemble_reduced(states, table, slack)
    else:
        dual = assemble_dual(states, table, slack)
    try:
        bound = certify_dual_bound(dual, certificate)
    except CertificationError as e:
        return _fail_closed(mu, overlap, kind, SolveStatus.NUMERICAL_FAILURE, str(e), float(slack.max()),
                            reduced=dual.reduced)
    return _finish(table, mu, overlap, kind, min(1.0, bound.value), SolveStatus.OPTIMAL, bound.certificate,
                   slack, dual_value=bound.value, reduced=dual.reduced, repaired=bound.repaired)


class SweepCurve(BaseModel):
    """一条扫描曲线"""
    axis: Literal["mu", "eta", "n_inputs"]
    points: List[float]
    results: List[CertResult]

    @model_validator(mode="after")
    def check_points(self) -> "SweepCurve":
        if len(self.points) != len(self.results):
            raise ValueError("扫描点与结果数量不一致")
        if any(b <= a for a, b in zip(self.points, self.points[1:])):
            raise ValueError("扫描点必须严格递增")
        return self

    @property
    def h_min(self) -> List[float]:
        return [r.h_min for r in self.results]

    @property
    def p_guess(self) -> List[float]:
        return [r.p_guess for r in self.results]

    def peak(self) -> Tuple[float, float]:
        """(点, h_min) 中 h_min 最大者"""
        i = int(np.argmax(self.h_min))
        return self.points[i], self.h_min[i]


class OptimalMu(BaseModel):
    """最优 μ 搜索结果"""
    mu_star: float
    h_star: float
    method: Literal["golden", "grid"]
    evaluations: List[Tuple[float, float]] = Field(default_factory=list)
    result: CertResult


def _check_grid(grid: Sequence[float]) -> List[float]:
    grid = [float(v) for v in grid]
    if not grid:
        raise DomainError("扫描网格为空")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("扫描网格必须严格递增")
    return grid


def certify_model_point(
    params: ExperimentParams,
    model_kind: OverlapKind,
    options: Optional[SolveOptions] = None,
    use_symmetry: bool = False,
) -> CertResult:
    """对模型表认证一个参数点; 领域错误记录在结果中"""
    try:
        return certify(model_table(params), params.mu, model_kind, options, slack_sigma=0.0,
                       use_symmetry=use_symmetry)
    except QrngError as e:
        return _fail_closed(params.mu, None, OverlapKind(model_kind), SolveStatus.NUMERICAL_FAILURE, str(e))


def _run_points(fn: Callable, jobs: List[tuple], workers: Optional[int]) -> List:
    """按网格顺序返回结果"""
    workers = workers or settings.WORKERS
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def sweep_mu(
    params: ExperimentParams,
    grid: Sequence[float],
    model_kind: OverlapKind,
    options: Optional[SolveOptions] = None,
    use_symmetry: bool = False,
    workers: Optional[int] = None,
) -> SweepCurve:
    """每个 μ 点认证一次模型表"""
    grid = _check_grid(grid)
    jobs = [(params.with_updates(mu=m), model_kind, options, use_symmetry) for m in grid]
    results = _run_points(certify_model_point, jobs, workers)
    failed = sum(1 for r in results if r.error)
    logger.info("μ 扫描完成", points=len(grid), failed=failed)
    return SweepCurve(axis="mu", points=grid, results=results)


def _is_unimodal(values: Sequence[float]) -> bool:
    i = int(np.argmax(values))
    if i == 0 or i == len(values) - 1:
        return False
    rising = all(b >= a - UNIMODAL_TOL for a, b in zip(values[: i + 1], values[1 : i + 1]))
    falling = all(b <= a + UNIMODAL_TOL for a, b in zip(values[i:], values[i + 1 :]))
    return rising and falling


def optimal_mu(
    params: ExperimentParams,
    model_kind: OverlapKind,
    bracket: Optional[Tuple[float, float]] = None,
    tol: float = 1e-3,
    options: Optional[SolveOptions] = None,
    use_symmetry: bool = False,
    prescan: int = PRESCAN_POINTS,
) -> OptimalMu:
    """粗扫描确认单峰后做黄金分割搜索; 非单峰时退化为细网格扫描"""
    model_kind = OverlapKind(model_kind)
    lo, hi = bracket or DEFAULT_BRACKETS[model_kind]
    if not (0.0 <= lo < hi) or tol <= 0:
        raise DomainError(f"无效的搜索区间 ({lo}, {hi}) 或容差 {tol}")

    cache: Dict[float, CertResult] = {}

    def evaluate(mu: float) -> float:
        if mu not in cache:
            cache[mu] = certify_model_point(params.with_updates(mu=mu), model_kind, options, use_symmetry)
        return cache[mu].h_min

    grid = list(np.linspace(lo, hi, prescan))
    values = [evaluate(m) for m in grid]
    method = "golden"
    if _is_unimodal(values):
        i = int(np.argmax(values))
        a, b = grid[i - 1], grid[i + 1]
        c = b - GOLDEN * (b - a)
        e = a + GOLDEN * (b - a)
        while b - a > tol:
            if evaluate(c) >= evaluate(e):
                b, e = e, c
                c = b - GOLDEN * (b - a)
            else:
                a, c = c, e
                e = a + GOLDEN * (b - a)
        evaluate(0.5 * (a + b))
    else:
        method = "grid"
        logger.warning("粗扫描非单峰, 改用网格扫描", bracket=(lo, hi))
        for m in np.linspace(lo, hi, FALLBACK_POINTS):
            evaluate(float(m))

    evaluations = sorted((m, r.h_min) for m, r in cache.items())
    mu_star = max(evaluations, key=lambda item: item[1])[0]
    result = cache[mu_star]
    logger.info("最优 μ 搜索完成", mu_star=mu_star, h_star=result.h_min, method=method, evaluations=len(cache))
    return OptimalMu(mu_star=mu_star, h_star=result.h_min, method=method, evaluations=evaluations, result=result)


def _optimal_point(params, model_kind, bracket, tol, options, use_symmetry) -> CertResult:
    return optimal_mu(params, model_kind, bracket, tol, options, use_symmetry).result


def sweep_efficiency(
    params: ExperimentParams,
    eta_grid: Sequence[float],
    model_kind: OverlapKind,
    bracket: Optional[Tuple[float, float]] = None,
    tol: float = 1e-3,
    options: Optional[SolveOptions] = None,
    use_symmetry: bool = False,
    workers: Optional[int] = None,
) -> SweepCurve:
    """每个 η 点先对 μ 取最优, 再记录 h_star"""
    grid = _check_grid(eta_grid)
    jobs = [(params.with_updates(eta=eta), model_kind, bracket, tol, options, use_symmetry) for eta in grid]
    results = _run_points(_optimal_point, jobs, workers)
    logger.info("η 扫描完成", points=len(grid))
    return SweepCurve(axis="eta", points=grid, results=results)


def sweep_inputs(
    params: ExperimentParams,
    n_values: Sequence[int],
    model_kind: OverlapKind,
    bracket: Optional[Tuple[float, float]] = None,
    tol: float = 1e-3,
    options: Optional[SolveOptions] = None,
    use_symmetry: bool = True,
    workers: Optional[int] = None,
) -> SweepCurve:
    """推广的 Config I: 每个输入数 n 的最优 μ 与 h_star"""
    grid = _check_grid(n_values)
    jobs = [(params.with_updates(n_inputs=int(n)), model_kind, bracket, tol, options, use_symmetry) for n in grid]
    results = _run_points(_optimal_point, jobs, workers)
    logger.info("输入数扫描完成", points=len(grid))
    return SweepCurve(axis="n_inputs", points=grid, results=results)


__all__ = [
    "CertResult",
    "OptimalMu",
    "SweepCurve",
    "certify",
    "certify_model_point",
    "check_energy_bound",
    "evaluate_certificate",
    "hmin_from_pguess",
    "optimal_mu",
    "simulate_power_records",
    "sweep_efficiency",
    "sweep_inputs",
    "sweep_mu",
]
