"""
随机数提取测试模块
"""
import numpy as np
import pytest
from pydantic import ValidationError
from scipy.linalg import toeplitz

from core.detection import Trials
from core.exceptions import DomainError, SeedLengthError
from core.extraction import (
    FFT_THRESHOLD,
    RawBits,
    ToeplitzSeed,
    extract_blocks,
    outcome_encoding,
    output_length,
    plan_blocks,
    symbol_width,
    toeplitz_extract,
)


def _matrix(seed: np.ndarray, n: int, m: int) -> np.ndarray:
    """显式 Toeplitz 矩阵 T[i][j] = seed[i - j + n - 1]"""
    return toeplitz(seed[n - 1:n - 1 + m], seed[n - 1::-1])


def test_known_answer():
    """n=3, m=2 的手算结果"""
    raw = RawBits(bits=[1, 1, 0])
    seed = ToeplitzSeed(bits=[1, 0, 1, 1])
    np.testing.assert_array_equal(toeplitz_extract(raw, seed, 2), [1, 0])


def test_unit_vector_selects_seed_window():
    """x = e_j 时输出为种子的一段"""
    n, m = 6, 4
    seed = np.random.default_rng(0).integers(0, 2, n + m - 1).astype(np.uint8)
    for j in range(n):
        x = np.zeros(n, dtype=np.uint8)
        x[j] = 1
        y = toeplitz_extract(RawBits(bits=x), ToeplitzSeed(bits=seed), m)
        np.testing.assert_array_equal(y, seed[np.arange(m) - j + n - 1])


def test_gf2_linearity():
    """T(x XOR x') = Tx XOR Tx'"""
    rng = np.random.default_rng(1)
    n, m = 64, 20
    seed = ToeplitzSeed(bits=rng.integers(0, 2, n + m - 1))
    a = rng.integers(0, 2, n)
    b = rng.integers(0, 2, n)
    ya = toeplitz_extract(RawBits(bits=a), seed, m)
    yb = toeplitz_extract(RawBits(bits=b), seed, m)
    yab = toeplitz_extract(RawBits(bits=a ^ b), seed, m)
    np.testing.assert_array_equal(yab, ya ^ yb)


@pytest.mark.parametrize("n", [100, FFT_THRESHOLD + 904])
def test_matches_explicit_matrix(n):
    """直接卷积与 FFT 卷积都与显式矩阵乘法一致"""
    rng = np.random.default_rng(n)
    m = 16
    seed = rng.integers(0, 2, n + m - 1).astype(np.uint8)
    x = rng.integers(0, 2, n).astype(np.uint8)
    expected = (_matrix(seed.astype(np.int64), n, m) @ x.astype(np.int64)) % 2
    y = toeplitz_extract(RawBits(bits=x), ToeplitzSeed(bits=seed), m)
    np.testing.assert_array_equal(y, expected)


def test_seed_length_checked():
    with pytest.raises(SeedLengthError):
        toeplitz_extract(RawBits(bits=[1, 0, 1]), ToeplitzSeed(bits=[1, 0, 1]), 2)
    with pytest.raises(DomainError):
        toeplitz_extract(RawBits(bits=[1, 0, 1]), ToeplitzSeed(bits=[1, 0]), 0)
    with pytest.raises(SeedLengthError):
        ToeplitzSeed(bits=[1, 0]).segment(1, 2)


def test_bits_validation():
    with pytest.raises(ValidationError):
        RawBits(bits=[])
    with pytest.raises(ValidationError):
        RawBits(bits=[0, 2])


def test_output_length():
    """m = floor(n·h - 2·log2(1/ε)), 不小于0"""
    assert output_length(1000, 0.5, 2.0 ** -10) == 480
    assert output_length(10, 0.1, 2.0 ** -10) == 0
    assert output_length(1000, 0.0, 2.0 ** -10) == 0
    assert output_length(10 ** 6, 0.258, 2.0 ** -100) == 257800
    with pytest.raises(DomainError):
        output_length(10, -0.1)
    with pytest.raises(DomainError):
        output_length(10, 0.5, 1.0)


def test_outcome_encoding():
    """d=7 时每个输出占3比特, 大端"""
    assert symbol_width(7) == 3
    assert symbol_width(2) == 1
    assert symbol_width(4) == 2
    raw = outcome_encoding([5, 0, 6], 7)
    np.testing.assert_array_equal(raw.bits, [1, 0, 1, 0, 0, 0, 1, 1, 0])
    trials = Trials(n=3, d=4, x=[0, 1, 2], b=[3, 1, 0])
    np.testing.assert_array_equal(outcome_encoding(trials, 4).bits, [1, 1, 0, 1, 0, 0])
    with pytest.raises(DomainError):
        outcome_encoding([0, 7], 7)
    with pytest.raises(DomainError):
        symbol_width(1)


def test_plan_blocks_aligned_to_symbols():
    """块长度按符号宽度向下对齐, 种子段连续排列"""
    blocks = plan_blocks(3000, 1.0, symbol_bits=3, eps_sec=2.0 ** -4, block_bits=1000)
    assert [b.input_bits for b in blocks] == [999, 999, 999, 3]
    assert blocks[0].output_bits == 333 - 8
    assert blocks[-1].output_bits == 0
    assert blocks[-1].seed_bits == 0
    for prev, block in zip(blocks, blocks[1:]):
        assert block.seed_offset == prev.seed_offset + prev.seed_bits
    with pytest.raises(DomainError):
        plan_blocks(100, 1.0, symbol_bits=3, block_bits=2)


def test_extract_blocks():
    rng = np.random.default_rng(3)
    raw = RawBits(bits=rng.integers(0, 2, 4000))
    blocks = plan_blocks(4000, 0.5, eps_sec=2.0 ** -8, block_bits=1500)
    required = sum(b.seed_bits for b in blocks)
    seed = ToeplitzSeed.random(required, seed=5)

    result = extract_blocks(raw, seed, 0.5, eps_sec=2.0 ** -8, block_bits=1500)
    assert result.bits.size == sum(b.output_bits for b in blocks)
    assert result.seed_bits_required == required
    assert result.metadata()["output_bits"] == result.bits.size
    extracting = sum(1 for b in blocks if b.output_bits > 0)
    assert extracting == 3
    assert result.eps_total == pytest.approx(3 * 2.0 ** -8)
    assert result.metadata()["eps_total"] == result.eps_total

    # 第一块等于单独提取
    first = blocks[0]
    alone = toeplitz_extract(RawBits(bits=raw.bits[:first.input_bits]),
                             seed.segment(0, first.seed_bits), first.output_bits)
    np.testing.assert_array_equal(result.bits[:first.output_bits], alone)

    with pytest.raises(SeedLengthError):
        extract_blocks(raw, ToeplitzSeed.random(required - 1, seed=5), 0.5, eps_sec=2.0 ** -8, block_bits=1500)


def test_zero_entropy_gives_no_output():
    raw = RawBits(bits=[1, 0, 1, 1])
    result = extract_blocks(raw, ToeplitzSeed(bits=[]), 0.0, eps_sec=0.5)
    assert result.bits.size == 0
    assert result.seed_bits_required == 0
    assert result.eps_total == 0.0


def test_random_seed_reproducible():
    a = ToeplitzSeed.random(64, seed=11)
    b = ToeplitzSeed.random(64, seed=11)
    np.testing.assert_array_equal(a.bits, b.bits)
    assert len(a) == 64
