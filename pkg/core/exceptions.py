"""
异常定义模块
"""
from typing import Optional


class QrngError(Exception):
    """所有领域错误的基类"""


class DomainError(QrngError, ValueError):
    """参数超出定义域"""


class ConstructionError(QrngError):
    """态族构造失败"""


class DimensionError(QrngError, ValueError):
    """维度不匹配"""


class StrategyLimitError(QrngError):
    """策略数超过上限"""

    def __init__(self, n: int, d: int, cap: int):
        self.n = n
        self.d = d
        self.cap = cap
        super().__init__(
            f"策略数 {d}^{n}={d ** n} 超过上限 {cap}; 请对对称表启用对称约化 (use_symmetry)"
        )


class SymmetryError(QrngError):
    """对称约化被拒绝"""


class EstimationError(QrngError):
    """无法由试验记录估计概率表"""


class ParseError(QrngError):
    """文件行解析失败"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"第 {line} 行: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class FormatError(QrngError):
    """文件格式或版本错误"""


class SeedLengthError(QrngError, ValueError):
    """Toeplitz 种子长度不匹配"""


class CertificationError(QrngError):
    """对偶证书被拒绝"""

    def __init__(self, message: str, worst_eigenvalue: Optional[float] = None):
        self.worst_eigenvalue = worst_eigenvalue
        super().__init__(message)
