"""
配置管理模块
"""
import math
from pathlib import Path
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """系统配置"""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # 应用配置
    APP_NAME: str = Field(default="SDI-QRNG Cert", description="应用名称")
    APP_VERSION: str = Field(default="1.0.0", description="应用版本")

    # 基础配置
    DEBUG: bool = Field(default=False, description="调试模式")
    WORKERS: int = Field(default=1, description="扫描并行进程数")

    # 服务配置
    HOST: str = Field(default="127.0.0.1", description="服务主机")
    PORT: int = Field(default=8000, description="服务端口")

    # 路径配置
    BASE_DIR: Path = Field(default=Path(__file__).parent.parent)
    LOG_DIR: Optional[Path] = Field(default=None, description="日志目录, 为空时只输出到终端")
    DATA_DIR: Path = Field(default=Path("data"), description="运行结果目录")

    # 日志配置
    LOG_LEVEL: str = Field(default="INFO", description="日志级别")
    LOG_FORMAT: str = Field(default="%(asctime)s - %(name)s - %(levelname)s - %(message)s", description="日志格式")
    LOG_JSON: bool = Field(default=False, description="以JSON格式输出日志")

    # 求解器配置
    SOLVER: str = Field(default="CLARABEL", description="cvxpy 锥规划求解器")
    GAP_TOL: float = Field(default=1e-8, description="对偶间隙容差")
    FEAS_TOL: float = Field(default=1e-8, description="可行性容差")
    MAX_ITERS: int = Field(default=500, description="最大迭代次数")
    DUALITY_TOL: float = Field(default=1e-6, description="原问题值与认证上界之差的容许量")
    STRATEGY_CAP: int = Field(default=100_000, description="策略数上限 d^n")
    SYMMETRY_CAP: int = Field(default=5_000_000, description="对称约化时允许枚举的策略数上限")
    SYMMETRY_TOL: float = Field(default=1e-9, description="对称性检查容差")
    CERT_MARGIN: float = Field(default=1e-12, description="特征值检查的保守余量")

    # 认证配置
    SLACK_SIGMA: float = Field(default=3.0, description="经验表约束松弛的标准误倍数")

    # 提取配置
    EPS_SEC: float = Field(default=2.0 ** -64, description="提取安全参数")
    EXTRACT_BLOCK_BITS: int = Field(default=2 ** 20, description="每个提取块的最大输入比特数")

    @field_validator("PORT")
    @classmethod
    def validate_port(cls, v: int) -> int:
        """验证端口范围"""
        if not 1 <= v <= 65535:
            raise ValueError("端口必须在1-65535之间")
        return v

    @field_validator("WORKERS", "MAX_ITERS", "STRATEGY_CAP", "SYMMETRY_CAP", "EXTRACT_BLOCK_BITS")
    @classmethod
    def validate_positive_int(cls, v: int) -> int:
        """验证正整数"""
        if v < 1:
            raise ValueError("必须大于0")
        return v

    @field_validator("GAP_TOL", "FEAS_TOL", "DUALITY_TOL", "SYMMETRY_TOL", "CERT_MARGIN")
    @classmethod
    def validate_tolerance(cls, v: float) -> float:
        """验证容差为正"""
        if not (v > 0 and math.isfinite(v)):
            raise ValueError("容差必须为正数")
        return v

    @field_validator("EPS_SEC")
    @classmethod
    def validate_eps_sec(cls, v: float) -> float:
        """验证安全参数"""
        if not 0 < v < 1:
            raise ValueError("安全参数必须在(0,1)之间")
        return v

    @field_validator("SLACK_SIGMA")
    @classmethod
    def validate_slack_sigma(cls, v: float) -> float:
        """验证松弛倍数"""
        if v < 0:
            raise ValueError("松弛倍数不能为负")
        return v

    def get_data_dir(self) -> Path:
        """获取运行结果目录"""
        if self.DATA_DIR.is_absolute():
            return self.DATA_DIR
        return Path.cwd() / self.DATA_DIR


# 全局配置实例
settings = Settings()
