"""
态几何模块

由能量界或重叠界得到两两重叠 δ, 并构造具有均匀重叠的纯态族。
"""
import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import linalg

from .exceptions import ConstructionError, DomainError
from .logger import get_logger

logger = get_logger(__name__)

GRAM_TOL = 1e-10


class OverlapKind(str, Enum):
    """重叠模型"""
    ENERGY = "energy"
    OVERLAP = "overlap"


class OverlapModel(BaseModel):
    """重叠模型: 假设类型, 平均光子数及对应的两两重叠"""
    model_config = ConfigDict(frozen=True)

    kind: OverlapKind
    mu: float = Field(ge=0.0, description="平均光子数")
    delta: float = Field(ge=0.0, le=1.0, description="两两重叠")

    @model_validator(mode="after")
    def check_delta(self) -> "OverlapModel":
        expected = overlap_from_model(self.kind, self.mu)
        if abs(expected - self.delta) > 1e-12:
            raise ValueError(f"重叠 {self.delta} 与模型 {self.kind.value}(mu={self.mu}) 不一致")
        return self

    @classmethod
    def from_mu(cls, kind: OverlapKind, mu: float) -> "OverlapModel":
        """由 mu 构造模型"""
        return cls(kind=kind, mu=mu, delta=overlap_from_model(kind, mu))


def overlap_from_model(kind: OverlapKind, mu: float) -> float:
    """由能量界 (1-2mu) 或重叠界 (exp(-mu)) 计算两两重叠"""
    if not math.isfinite(mu) or mu < 0:
        raise DomainError(f"平均光子数必须为非负有限值: {mu}")
    kind = OverlapKind(kind)
    if kind is OverlapKind.ENERGY:
        delta = 1.0 - 2.0 * mu
    else:
        delta = math.exp(-mu)
    return min(1.0, max(0.0, delta))


class StateFamily(BaseModel):
    """n 个两两重叠为 δ 的实单位向量"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(ge=2)
    delta: float = Field(ge=0.0, le=1.0)
    vectors: np.ndarray

    @field_validator("vectors", mode="before")
    @classmethod
    def freeze_vectors(cls, v: np.ndarray) -> np.ndarray:
        v = np.array(v, dtype=float)
        v.setflags(write=False)
        return v

    @model_validator(mode="after")
    def check_shape(self) -> "StateFamily":
        if self.vectors.shape != (self.n, self.n):
            raise ValueError(f"态向量形状应为 ({self.n}, {self.n}), 实际 {self.vectors.shape}")
        return self

    def gram(self) -> np.ndarray:
        """Gram 矩阵 <psi_x|psi_y>"""
        return self.vectors @ self.vectors.T

    def projectors(self) -> np.ndarray:
        """投影算符 rho_x = |psi_x><psi_x|, 形状 (n, n, n)"""
        return np.einsum("xi,xj->xij", self.vectors, self.vectors)

    def frame_min_eigenvalue(self) -> float:
        """sum_x rho_x 的最小特征值 (均匀重叠时为 1-δ)"""
        frame = self.vectors.T @ self.vectors
        return float(np.linalg.eigvalsh(frame)[0])


def target_gram(n: int, delta: float) -> np.ndarray:
    """(1-δ)I + δJ"""
    return (1.0 - delta) * np.eye(n) + delta * np.ones((n, n))


def build_states(n: int, delta: float) -> StateFamily:
    """以 Gram 矩阵的下三角 Cholesky 因子的行作为态向量"""
    if n < 2:
        raise DomainError(f"输入数至少为2: {n}")
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"重叠必须在[0,1]之间: {delta}")

    gram = target_gram(n, delta)
    if delta == 1.0:
        # 秩一: 所有态相同
        vectors = np.zeros((n, n))
        vectors[:, 0] = 1.0
    else:
        try:
            vectors = linalg.cholesky(gram, lower=True)
        except linalg.LinAlgError as e:
            raise ConstructionError(f"Gram 矩阵数值上不定 (n={n}, delta={delta}): {e}") from e

    error = float(np.max(np.abs(vectors @ vectors.T - gram)))
    if not np.isfinite(error) or error > GRAM_TOL:
        raise ConstructionError(f"态族 Gram 矩阵偏差过大: {error:.3e}")

    logger.debug("构造态族", n=n, delta=delta, gram_error=error)
    return StateFamily(n=n, delta=delta, vectors=vectors)
