"""
探测模型模块

Config I / Config II 的条件概率模型 p(b|x), 有限次试验的模拟与经验估计。
"""
import hashlib
import math
from enum import Enum
from typing import Iterable, Iterator, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .exceptions import DimensionError, EstimationError
from .logger import get_logger

logger = get_logger(__name__)

ROW_TOL = 1e-12


class ConfigKind(str, Enum):
    """时间箱编码配置"""
    CONFIG_I = "I"
    CONFIG_II = "II"


class LossFold(str, Enum):
    """探测效率并入真空概率 ξ 的方式"""
    POISSON = "poisson"
    LINEAR = "linear"


class ExperimentParams(BaseModel):
    """实验参数"""
    model_config = ConfigDict(frozen=True)

    config: ConfigKind = ConfigKind.CONFIG_I
    n_inputs: int = Field(default=3, ge=2, le=8, description="输入数")
    mu: float = Field(default=0.18, ge=0.0, description="每个脉冲的平均光子数")
    eta: float = Field(default=1.0, ge=0.0, le=1.0, description="探测效率")
    epsilon: float = Field(default=0.0, ge=0.0, lt=1.0, description="每个空箱的噪声点击概率")
    loss_fold: LossFold = LossFold.POISSON

    @model_validator(mode="after")
    def check_inputs(self) -> "ExperimentParams":
        if self.config is ConfigKind.CONFIG_II and self.n_inputs != 3:
            raise ValueError("Config II 只支持3个输入")
        if not math.isfinite(self.mu):
            raise ValueError("平均光子数必须有限")
        return self

    @property
    def n_outcomes(self) -> int:
        """输出数 d"""
        if self.config is ConfigKind.CONFIG_II:
            return 7
        return self.n_inputs + 1

    def with_updates(self, **changes) -> "ExperimentParams":
        """返回修改了部分字段的新参数"""
        return type(self).model_validate({**self.model_dump(), **changes})

    def vacuum_probability(self) -> float:
        """一个被占据时间箱不产生信号点击的概率 ξ"""
        if self.loss_fold is LossFold.POISSON:
            return math.exp(-self.eta * self.mu)
        return 1.0 - self.eta * (1.0 - math.exp(-self.mu))


class ProbTable(BaseModel):
    """n×d 行随机矩阵 p(b|x)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(ge=1)
    d: int = Field(ge=2)
    p: np.ndarray
    params: Optional[ExperimentParams] = None
    counts: Optional[np.ndarray] = None

    @field_validator("p", "counts", mode="before")
    @classmethod
    def freeze_array(cls, v):
        if v is None:
            return v
        v = np.array(v, dtype=float)
        v.setflags(write=False)
        return v

    @model_validator(mode="after")
    def check_stochastic(self) -> "ProbTable":
        if self.p.shape != (self.n, self.d):
            raise ValueError(f"概率表形状应为 ({self.n}, {self.d}), 实际 {self.p.shape}")
        if not np.all(np.isfinite(self.p)) or np.any(self.p < 0.0) or np.any(self.p > 1.0):
            raise ValueError("概率表元素必须在[0,1]之间")
        row_error = float(np.max(np.abs(self.p.sum(axis=1) - 1.0)))
        if row_error > ROW_TOL:
            raise ValueError(f"概率表每行之和必须为1, 偏差 {row_error:.3e}")
        if self.counts is not None and self.counts.shape != (self.n, self.d):
            raise ValueError("计数矩阵形状与概率表不一致")
        return self

    def row_trials(self) -> Optional[np.ndarray]:
        """每个输入的试验次数"""
        if self.counts is None:
            return None
        return self.counts.sum(axis=1)

    def standard_errors(self) -> np.ndarray:
        """每个元素的二项标准误; 模型表为零

        频率先做加一平滑, 以免零计数的元素被当作精确约束。
        """
        if self.counts is None:
            return np.zeros((self.n, self.d))
        totals = self.counts.sum(axis=1, keepdims=True)
        smoothed = (self.counts + 1.0) / (totals + 2.0)
        return np.sqrt(smoothed * (1.0 - smoothed) / totals)

    def slack(self, sigma: float) -> np.ndarray:
        """l∞ 松弛: sigma 倍标准误"""
        return sigma * self.standard_errors()

    def best_deterministic(self) -> float:
        """(1/n) sum_x max_b p(b|x): 对手总能达到的猜测概率"""
        return float(self.p.max(axis=1).mean())

    def digest(self) -> str:
        """概率表的 SHA-256 摘要"""
        h = hashlib.sha256()
        h.update(f"{self.n}x{self.d}".encode())
        h.update(np.ascontiguousarray(self.p, dtype="<f8").tobytes())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "p": self.p.tolist(),
            "params": self.params.model_dump(mode="json") if self.params else None,
            "counts": self.counts.tolist() if self.counts is not None else None,
        }


class TrialRecord(BaseModel):
    """一次试验的输入与输出"""
    model_config = ConfigDict(frozen=True)

    x: int = Field(ge=0)
    b: int = Field(ge=0)


class Trials(BaseModel):
    """一批试验记录, 以数组形式保存"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(ge=1)
    d: int = Field(ge=2)
    x: np.ndarray
    b: np.ndarray

    @field_validator("x", "b", mode="before")
    @classmethod
    def freeze_symbols(cls, v):
        v = np.array(v, dtype=np.int64).reshape(-1)
        v.setflags(write=False)
        return v

    @model_validator(mode="after")
    def check_symbols(self) -> "Trials":
        if self.x.shape != self.b.shape:
            raise ValueError("输入与输出序列长度不一致")
        if self.x.size and (self.x.min() < 0 or self.x.max() >= self.n):
            raise ValueError(f"输入符号必须在[0,{self.n})之间")
        if self.b.size and (self.b.min() < 0 or self.b.max() >= self.d):
            raise ValueError(f"输出符号必须在[0,{self.d})之间")
        return self

    def __len__(self) -> int:
        return int(self.x.size)

    def records(self) -> Iterator[TrialRecord]:
        """逐条产生 TrialRecord"""
        for x, b in zip(self.x.tolist(), self.b.tolist()):
            yield TrialRecord(x=x, b=b)

    @classmethod
    def from_records(cls, records: Iterable[TrialRecord], n: int, d: int) -> "Trials":
        records = list(records)
        return cls(n=n, d=d, x=[r.x for r in records], b=[r.b for r in records])


def _finish_table(rows: np.ndarray, params: ExperimentParams) -> ProbTable:
    """最后一列取余量, 使每行之和为1"""
    rows[:, -1] = np.maximum(0.0, 1.0 - rows[:, :-1].sum(axis=1))
    return ProbTable(n=rows.shape[0], d=rows.shape[1], p=rows, params=params)


def config1_table(params: ExperimentParams) -> ProbTable:
    """Config I: n 个时间箱中恰有一个被占据, 最后一个输出为不确定结果"""
    if params.config is not ConfigKind.CONFIG_I:
        raise DimensionError("config1_table 需要 Config I 参数")
    n = params.n_inputs
    d = n + 1
    xi = params.vacuum_probability()
    eps = params.epsilon

    hit = (1.0 - xi + xi * eps) * (1.0 - eps) ** (n - 1)
    wrong = xi * eps * (1.0 - eps) ** (n - 1)

    rows = np.full((n, d), wrong)
    np.fill_diagonal(rows[:, :n], hit)
    return _finish_table(rows, params)


# Config II: 态 x 令第 x 个时间箱为空; (x, 输出类别) -> b
CONFIG2_DOUBLE = {0: 0, 1: 1, 2: 2}
CONFIG2_SINGLE_OCCUPIED = {0: (3, 4), 1: (3, 5), 2: (4, 5)}
CONFIG2_SINGLE_EMPTY = {0: 5, 1: 4, 2: 3}


def config2_table(params: ExperimentParams) -> ProbTable:
    """Config II: 三个时间箱中两个被占据, 七个输出"""
    if params.config is not ConfigKind.CONFIG_II or params.n_inputs != 3:
        raise DimensionError("config2_table 需要3输入的 Config II 参数")
    xi = params.vacuum_probability()
    eps = params.epsilon
    click = 1.0 - xi + xi * eps

    rows = np.zeros((3, 7))
    for x in range(3):
        rows[x, CONFIG2_DOUBLE[x]] = click ** 2 * (1.0 - eps)
        for b in CONFIG2_SINGLE_OCCUPIED[x]:
            rows[x, b] = click * xi * (1.0 - eps) ** 2
        rows[x, CONFIG2_SINGLE_EMPTY[x]] = eps * xi ** 2 * (1.0 - eps) ** 2
        for other in range(3):
            if other != x:
                rows[x, CONFIG2_DOUBLE[other]] = click * eps * xi * (1.0 - eps)
    return _finish_table(rows, params)


def model_table(params: ExperimentParams) -> ProbTable:
    """按配置选择模型"""
    if params.config is ConfigKind.CONFIG_II:
        return config2_table(params)
    return config1_table(params)


def simulate_trials(table: ProbTable, count: int, seed: Optional[int]) -> Trials:
    """均匀抽取输入 x, 再按第 x 行抽取输出 b"""
    if count < 1:
        raise EstimationError(f"试验次数必须为正: {count}")
    rng = np.random.default_rng(seed)
    x = rng.integers(0, table.n, size=count)
    cdf = np.cumsum(table.p, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(count)
    b = (u[:, None] >= cdf[x]).sum(axis=1)
    logger.info("模拟试验完成", count=count, n=table.n, d=table.d, seed=seed)
    return Trials(n=table.n, d=table.d, x=x, b=b)


def empirical_table(
    trials: Union[Trials, Iterable[TrialRecord]], n: int, d: int
) -> Tuple[ProbTable, np.ndarray]:
    """由计数得到最大似然频率表"""
    if not isinstance(trials, Trials):
        trials = Trials.from_records(trials, n=n, d=d)
    if len(trials) == 0:
        raise EstimationError("试验记录为空")
    if trials.n != n or trials.d != d:
        raise DimensionError(f"试验记录维度 ({trials.n},{trials.d}) 与请求 ({n},{d}) 不一致")

    counts = np.bincount(trials.x * d + trials.b, minlength=n * d).reshape(n, d)
    totals = counts.sum(axis=1)
    missing = [int(x) for x in np.flatnonzero(totals == 0)]
    if missing:
        raise EstimationError(f"输入 {missing} 没有任何试验, 无法估计对应行")

    p = counts / totals[:, None]
    table = ProbTable(n=n, d=d, p=p, counts=counts)
    return table, counts
