"""
随机数提取模块

原始输出按定宽二进制编码, 再用 Toeplitz 矩阵在 GF(2) 上哈希。输出长度由剩余哈希引理给出:
m = floor(n·H_min - 2·log2(1/ε))。
"""
import math
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import signal

from .config import settings
from .detection import Trials
from .exceptions import DomainError, SeedLengthError
from .logger import get_logger

logger = get_logger(__name__)

# 超过此长度时用 FFT 卷积
FFT_THRESHOLD = 4096


def _bit_array(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.uint8).reshape(-1)
    if v.size and v.max() > 1:
        raise ValueError("比特序列只能包含 0 和 1")
    v = v.copy()
    v.setflags(write=False)
    return v


class RawBits(BaseModel):
    """待提取的原始比特"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bits: np.ndarray
    origin: str = Field(default="raw", description="输出到比特的编码描述")

    @field_validator("bits", mode="before")
    @classmethod
    def validate_bits(cls, v):
        v = _bit_array(v)
        if v.size == 0:
            raise ValueError("原始比特序列不能为空")
        return v

    def __len__(self) -> int:
        return int(self.bits.size)


class ToeplitzSeed(BaseModel):
    """Toeplitz 种子; 与原始数据独立是使用前提"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bits: np.ndarray

    @field_validator("bits", mode="before")
    @classmethod
    def validate_bits(cls, v):
        return _bit_array(v)

    def __len__(self) -> int:
        return int(self.bits.size)

    def segment(self, start: int, length: int) -> "ToeplitzSeed":
        if start + length > len(self):
            raise SeedLengthError(f"种子长度 {len(self)} 不足, 需要 {start + length}")
        return ToeplitzSeed(bits=self.bits[start:start + length])

    @classmethod
    def random(cls, length: int, seed: Optional[int] = None) -> "ToeplitzSeed":
        """伪随机种子, 仅用于模拟与测试"""
        rng = np.random.default_rng(seed)
        return cls(bits=rng.integers(0, 2, size=length, dtype=np.uint8))


def symbol_width(d: int) -> int:
    """每个输出占用的比特数 ceil(log2 d)"""
    if d < 2:
        raise DomainError(f"输出数至少为2: {d}")
    return int(math.ceil(math.log2(d)))


def outcome_encoding(trials: Union[Trials, Sequence[int]], d: int) -> RawBits:
    """每个输出 b 编码为定宽大端比特, 按试验顺序拼接"""
    outcomes = trials.b if isinstance(trials, Trials) else np.asarray(trials, dtype=np.int64)
    if outcomes.size == 0:
        raise DomainError("试验记录为空")
    if outcomes.min() < 0 or outcomes.max() >= d:
        raise DomainError(f"输出符号必须在[0,{d})之间")
    width = symbol_width(d)
    shifts = np.arange(width - 1, -1, -1)
    bits = (outcomes[:, None] >> shifts[None, :]) & 1
    return RawBits(bits=bits.reshape(-1), origin=f"fixed-width big-endian, {width} bits/symbol, d={d}")


def output_length(n_symbols: int, h_min_per_symbol: float, eps_sec: Optional[float] = None) -> int:
    """m = floor(n·h - 2·log2(1/ε)), 不小于 0"""
    eps_sec = settings.EPS_SEC if eps_sec is None else eps_sec
    if h_min_per_symbol < 0:
        raise DomainError(f"最小熵不能为负: {h_min_per_symbol}")
    if not 0.0 < eps_sec < 1.0:
        raise DomainError(f"安全参数必须在(0,1)之间: {eps_sec}")
    m = math.floor(n_symbols * h_min_per_symbol - 2.0 * math.log2(1.0 / eps_sec))
    return max(0, m)


def toeplitz_extract(raw: RawBits, seed: ToeplitzSeed, m: int) -> np.ndarray:
    """y_i = XOR_j T[i][j] x_j, T[i][j] = seed[i - j + len(raw) - 1]

    即 y = (seed * x)[len(raw)-1 : len(raw)-1+m] mod 2。
    """
    n = len(raw)
    if m < 1:
        raise DomainError(f"输出长度必须为正: {m}")
    if len(seed) != n + m - 1:
        raise SeedLengthError(f"种子长度应为 {n + m - 1}, 实际 {len(seed)}")

    x = raw.bits.astype(np.int64)
    s = seed.bits.astype(np.int64)
    if n <= FFT_THRESHOLD:
        full = np.convolve(s, x)
    else:
        full = np.rint(signal.fftconvolve(s.astype(float), x.astype(float))).astype(np.int64)
    return (full[n - 1:n - 1 + m] & 1).astype(np.uint8)


class ExtractionBlock(BaseModel):
    """一个提取块的元数据"""
    index: int
    input_bits: int
    output_bits: int
    seed_offset: int
    seed_bits: int


class ExtractionResult(BaseModel):
    """分块提取结果"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    bits: np.ndarray
    blocks: List[ExtractionBlock]
    h_min_per_symbol: float
    symbol_bits: int
    eps_sec: float
    seed_independent: bool = Field(default=True, description="种子与原始数据独立 (使用者保证)")

    @property
    def seed_bits_required(self) -> int:
        return sum(b.seed_bits for b in self.blocks)

    @property
    def eps_total(self) -> float:
        """各块独立提取, 组合安全参数为产生输出的块数乘以 eps_sec"""
        return self.eps_sec * sum(1 for b in self.blocks if b.output_bits > 0)

    def metadata(self) -> dict:
        return {
            "output_bits": int(self.bits.size),
            "h_min_per_symbol": self.h_min_per_symbol,
            "symbol_bits": self.symbol_bits,
            "eps_sec": self.eps_sec,
            "eps_total": self.eps_total,
            "seed_independent": self.seed_independent,
            "blocks": [b.model_dump() for b in self.blocks],
        }


def plan_blocks(
    n_bits: int,
    h_min_per_symbol: float,
    symbol_bits: int = 1,
    eps_sec: Optional[float] = None,
    block_bits: Optional[int] = None,
) -> List[ExtractionBlock]:
    """把输入切成不超过 block_bits 的块 (按符号边界对齐), 每块独立计算输出长度与种子段"""
    block_bits = block_bits or settings.EXTRACT_BLOCK_BITS
    block_bits -= block_bits % symbol_bits
    if block_bits < symbol_bits:
        raise DomainError(f"块长度 {block_bits} 小于符号宽度 {symbol_bits}")
    blocks = []
    offset = 0
    for index, start in enumerate(range(0, n_bits, block_bits)):
        size = min(block_bits, n_bits - start)
        m = output_length(size // symbol_bits, h_min_per_symbol, eps_sec)
        seed_bits = size + m - 1 if m > 0 else 0
        blocks.append(ExtractionBlock(index=index, input_bits=size, output_bits=m,
                                      seed_offset=offset, seed_bits=seed_bits))
        offset += seed_bits
    return blocks


def extract_blocks(
    raw: RawBits,
    seed: ToeplitzSeed,
    h_min_per_symbol: float,
    symbol_bits: int = 1,
    eps_sec: Optional[float] = None,
    block_bits: Optional[int] = None,
) -> ExtractionResult:
    """分块提取; 每块使用种子的下一段, 输出按块序拼接"""
    eps_sec = settings.EPS_SEC if eps_sec is None else eps_sec
    blocks = plan_blocks(len(raw), h_min_per_symbol, symbol_bits, eps_sec, block_bits)
    required = sum(b.seed_bits for b in blocks)
    if len(seed) < required:
        raise SeedLengthError(f"种子长度 {len(seed)} 不足, 需要 {required}")

    outputs = []
    start = 0
    for block in blocks:
        chunk = raw.bits[start:start + block.input_bits]
        start += block.input_bits
        if block.output_bits == 0:
            continue
        piece = RawBits(bits=chunk, origin=raw.origin)
        outputs.append(toeplitz_extract(piece, seed.segment(block.seed_offset, block.seed_bits), block.output_bits))

    bits = np.concatenate(outputs) if outputs else np.zeros(0, dtype=np.uint8)
    logger.info("提取完成", input_bits=len(raw), output_bits=int(bits.size), blocks=len(blocks))
    return ExtractionResult(bits=bits, blocks=blocks, h_min_per_symbol=h_min_per_symbol,
                            symbol_bits=symbol_bits, eps_sec=eps_sec)
