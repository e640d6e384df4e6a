"""
运行配置模块

RunConfig 是一次运行的全部参数, 可由扁平的 key=value 文件给出 (用 python-dotenv 解析)。
优先级: 配置文件 > 命令行参数 > Settings 默认值。未知键一律拒绝。
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .config import settings
from .detection import ConfigKind, ExperimentParams, LossFold
from .engine import SolveOptions
from .exceptions import FormatError
from .states import OverlapKind
from .timestamps import BinningConfig

RUNCONFIG_VERSION = 1


class RunConfig(BaseModel):
    """一次运行的配置"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    version: int = RUNCONFIG_VERSION

    # 实验参数
    config: ConfigKind = ConfigKind.CONFIG_I
    n_inputs: int = Field(default=3, ge=2, le=8)
    mu: float = Field(default=0.18, ge=0.0)
    eta: float = Field(default=1.0, ge=0.0, le=1.0)
    eps: float = Field(default=1e-5, ge=0.0, lt=1.0, description="噪声点击概率 ε")
    loss_fold: LossFold = LossFold.POISSON
    model: OverlapKind = OverlapKind.ENERGY

    # 求解
    solver: str = Field(default_factory=lambda: settings.SOLVER)
    gap_tol: float = Field(default_factory=lambda: settings.GAP_TOL, gt=0.0)
    feas_tol: float = Field(default_factory=lambda: settings.FEAS_TOL, gt=0.0)
    max_iters: int = Field(default_factory=lambda: settings.MAX_ITERS, ge=1)
    solve_primal: bool = True
    use_symmetry: bool = False
    slack_sigma: float = Field(default_factory=lambda: settings.SLACK_SIGMA, ge=0.0)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)

    # 扫描
    mu_min: float = Field(default=0.02, ge=0.0)
    mu_max: float = Field(default=0.5, ge=0.0)
    mu_step: float = Field(default=0.02, gt=0.0)
    eta_grid: List[float] = Field(default_factory=lambda: [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    n_values: List[int] = Field(default_factory=lambda: [2, 3, 4, 5])
    bracket: Optional[List[float]] = None
    tol: float = Field(default=1e-3, gt=0.0)

    # 模拟与提取
    trials: int = Field(default=100_000, ge=1)
    seed: Optional[int] = None
    eps_sec: float = Field(default_factory=lambda: settings.EPS_SEC, gt=0.0, lt=1.0)
    block_bits: int = Field(default_factory=lambda: settings.EXTRACT_BLOCK_BITS, ge=1)
    power_noise: float = Field(default=0.01, ge=0.0)
    power_records: int = Field(default=100, ge=1)

    # 时间箱
    period_ps: int = Field(default=3000, gt=0)
    bin_offsets_ps: List[int] = Field(default_factory=lambda: [0, 1000, 2000])
    bin_width_ps: int = Field(default=800, gt=0)

    # 文件
    out: Path = Field(default_factory=lambda: settings.get_data_dir())
    timestamps: Optional[Path] = None
    inputs: Optional[Path] = None
    table: Optional[Path] = None
    trials_file: Optional[Path] = None
    certificate: Optional[Path] = None
    seed_file: Optional[Path] = None
    power_file: Optional[Path] = None
    require_energy_check: bool = Field(default=False, description="没有功率记录时拒绝认证")

    @field_validator("version")
    @classmethod
    def validate_version(cls, v: int) -> int:
        if v != RUNCONFIG_VERSION:
            raise ValueError(f"不支持的配置版本: {v}")
        return v

    @field_validator("eta_grid", "n_values", "bin_offsets_ps", "bracket", mode="before")
    @classmethod
    def split_list(cls, v):
        if isinstance(v, str):
            return [item.strip() for item in v.split(",") if item.strip()]
        return v

    @field_validator("bracket")
    @classmethod
    def validate_bracket(cls, v):
        if v is not None and (len(v) != 2 or not 0.0 <= v[0] < v[1]):
            raise ValueError("bracket 应为 lo,hi 且 0 <= lo < hi")
        return v

    @classmethod
    def load(
        cls,
        path: Optional[Union[str, Path]] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> "RunConfig":
        """合并命令行参数与配置文件; 文件中的键覆盖命令行"""
        values = {k: v for k, v in (overrides or {}).items() if v is not None}
        if path is not None:
            if not Path(path).is_file():
                raise FormatError(f"配置文件不存在: {path}")
            parsed = dotenv_values(path)
            empty = [k for k, v in parsed.items() if v is None]
            if empty:
                raise FormatError(f"配置项缺少取值: {empty}")
            values.update(parsed)
        try:
            return cls(**values)
        except ValidationError as e:
            raise FormatError(f"运行配置无效: {e}") from e

    def experiment_params(self, **changes) -> ExperimentParams:
        params = ExperimentParams(
            config=self.config,
            n_inputs=3 if self.config is ConfigKind.CONFIG_II else self.n_inputs,
            mu=self.mu,
            eta=self.eta,
            epsilon=self.eps,
            loss_fold=self.loss_fold,
        )
        return params.with_updates(**changes) if changes else params

    def solve_options(self) -> SolveOptions:
        return SolveOptions(
            gap_tol=self.gap_tol,
            feas_tol=self.feas_tol,
            max_iters=self.max_iters,
            solver=self.solver,
            solve_primal=self.solve_primal,
        )

    def binning(self) -> BinningConfig:
        return BinningConfig(
            period_ps=self.period_ps,
            bin_offsets_ps=self.bin_offsets_ps,
            bin_width_ps=self.bin_width_ps,
            config=self.config,
        )

    def mu_grid(self) -> List[float]:
        """[mu_min, mu_max] 上步长为 mu_step 的网格 (含端点)"""
        if self.mu_max < self.mu_min:
            raise FormatError("mu_max 不能小于 mu_min")
        count = int(np.floor((self.mu_max - self.mu_min) / self.mu_step + 1e-9)) + 1
        return [round(self.mu_min + i * self.mu_step, 12) for i in range(count)]

    def bracket_tuple(self):
        return tuple(self.bracket) if self.bracket else None
