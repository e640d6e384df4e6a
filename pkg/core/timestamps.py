"""
时间戳处理模块

把时间数字转换器记录的点击 (time_ps, channel) 按试验周期和时间窗归入时间箱,
再映射为协议输出 b。点击模式以位掩码表示: 第 k 位对应时间箱 k。
"""
import itertools
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .detection import ConfigKind, Trials
from .exceptions import DomainError, FormatError, ParseError
from .logger import get_logger

logger = get_logger(__name__)

FILE_VERSION = 1
# 流式读取时每块的记录数
CHUNK_RECORDS = 1 << 16

# Config II: 点击模式掩码 -> b; 空与三重点击为 b=6
CONFIG2_PATTERN_TO_OUTCOME = {
    0b110: 0,
    0b101: 1,
    0b011: 2,
    0b100: 3,
    0b010: 4,
    0b001: 5,
}
CONFIG2_INCONCLUSIVE = 6


class TimestampRecord(BaseModel):
    """一次探测事件"""
    model_config = ConfigDict(frozen=True)

    time_ps: int = Field(ge=0, description="皮秒时间戳")
    channel: int = Field(ge=0, description="探测器通道")


class BinningConfig(BaseModel):
    """时间箱划分"""
    model_config = ConfigDict(frozen=True)

    period_ps: int = Field(gt=0, description="试验周期")
    bin_offsets_ps: List[int] = Field(description="各时间窗起点 (相对周期起点)")
    bin_width_ps: int = Field(gt=0, description="时间窗宽度")
    config: ConfigKind = ConfigKind.CONFIG_I
    channels: Optional[List[int]] = Field(default=None, description="接受的通道, 为空时接受全部")

    @model_validator(mode="after")
    def check_windows(self) -> "BinningConfig":
        offsets = self.bin_offsets_ps
        if len(offsets) < 2:
            raise ValueError("至少需要两个时间窗")
        if self.config is ConfigKind.CONFIG_II and len(offsets) != 3:
            raise ValueError("Config II 需要三个时间窗")
        if any(o < 0 for o in offsets):
            raise ValueError("时间窗起点不能为负")
        ordered = sorted(offsets)
        if any(b < a + self.bin_width_ps for a, b in zip(ordered, ordered[1:])):
            raise ValueError("时间窗不能重叠")
        if ordered[-1] + self.bin_width_ps > self.period_ps:
            raise ValueError("时间窗必须位于周期之内")
        return self

    @property
    def n_bins(self) -> int:
        return len(self.bin_offsets_ps)

    @property
    def n_outcomes(self) -> int:
        return 7 if self.config is ConfigKind.CONFIG_II else self.n_bins + 1

    def bin_of(self, offset: int) -> Optional[int]:
        """周期内偏移所属的时间箱, 不在任何窗口内时为 None"""
        for k, start in enumerate(self.bin_offsets_ps):
            if start <= offset < start + self.bin_width_ps:
                return k
        return None

    def bins_of(self, offsets: np.ndarray) -> np.ndarray:
        """bin_of 的数组形式, 不在任何窗口内时为 -1"""
        offsets = np.asarray(offsets, dtype=np.int64)
        bins = np.full(offsets.shape, -1, dtype=np.int64)
        for k, start in enumerate(self.bin_offsets_ps):
            bins[(offsets >= start) & (offsets < start + self.bin_width_ps)] = k
        return bins

    def gap_offset(self) -> Optional[int]:
        """一个不属于任何窗口的偏移"""
        for candidate in [0] + [o + self.bin_width_ps for o in self.bin_offsets_ps]:
            if candidate < self.period_ps and self.bin_of(candidate) is None:
                return candidate
        return None


class ParsedTimestamps(BaseModel):
    """解析结果"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    patterns: np.ndarray = Field(description="每个试验的点击掩码")
    records: int
    discarded: int = Field(description="窗口外或通道不符而被丢弃的点击数")

    @property
    def trials(self) -> int:
        return int(self.patterns.size)


def _header_entry(line: str, number: int) -> tuple:
    body = line[1:].strip()
    if "=" not in body:
        raise ParseError(f"无效的头部行: {line.strip()}", number)
    key, value = body.split("=", 1)
    return key.strip(), value.strip()


def _open(source: Union[str, Path, TextIO]):
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8")
    return source


def _check_version(header: Dict[str, str]) -> None:
    if "version" not in header:
        raise FormatError("缺少版本头部 #version")
    if header["version"] != str(FILE_VERSION):
        raise FormatError(f"不支持的文件版本: {header['version']}")


def _parse_record(text: str, number: int) -> Tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ParseError(f"应为 time_ps,channel: {text}", number)
    try:
        time_ps, channel = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(f"无法解析为整数: {text}", number)
    if time_ps < 0 or channel < 0:
        raise ParseError(f"时间与通道不能为负: {text}", number)
    return time_ps, channel


class TimestampReader:
    """按块流式读取时间戳文件

    头部 (#key=value) 位于数据之前, 进入上下文时读完并检查版本;
    chunks() 每次最多产生 chunk_size 条记录的 (time_ps, channel) 数组。
    """

    def __init__(self, source: Union[str, Path, TextIO], chunk_size: int = CHUNK_RECORDS):
        if chunk_size < 1:
            raise DomainError(f"块大小必须为正: {chunk_size}")
        self._source = source
        self._chunk_size = chunk_size
        self._stream: Optional[TextIO] = None
        self._lines: Iterator[Tuple[int, str]] = iter(())
        self._pending: Optional[Tuple[int, str]] = None
        self.header: Dict[str, str] = {}

    def __enter__(self) -> "TimestampReader":
        self._stream = _open(self._source)
        self._lines = self._numbered(self._stream)
        try:
            self._read_header()
        except Exception:
            self.close()
            raise
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._stream is not None and self._stream is not self._source:
            self._stream.close()
        self._stream = None

    @staticmethod
    def _numbered(stream: TextIO) -> Iterator[Tuple[int, str]]:
        for number, line in enumerate(stream, start=1):
            text = line.strip()
            if text:
                yield number, text

    def _read_header(self) -> None:
        for number, text in self._lines:
            if not text.startswith("#"):
                self._pending = (number, text)
                break
            key, value = _header_entry(text, number)
            self.header[key] = value
        _check_version(self.header)

    def chunks(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """时间单调不减; 数据之后出现头部行视为格式错误"""
        lines = itertools.chain([self._pending] if self._pending else [], self._lines)
        self._pending = None
        times: List[int] = []
        channels: List[int] = []
        last = -1
        for number, text in lines:
            if text.startswith("#"):
                raise ParseError(f"头部行必须位于数据之前: {text}", number)
            time_ps, channel = _parse_record(text, number)
            if time_ps < last:
                raise FormatError(f"第 {number} 行时间非单调: {time_ps} < {last}")
            last = time_ps
            times.append(time_ps)
            channels.append(channel)
            if len(times) >= self._chunk_size:
                yield np.asarray(times, dtype=np.int64), np.asarray(channels, dtype=np.int64)
                times, channels = [], []
        if times:
            yield np.asarray(times, dtype=np.int64), np.asarray(channels, dtype=np.int64)

    def records(self) -> Iterator[TimestampRecord]:
        for times, channels in self.chunks():
            for time_ps, channel in zip(times.tolist(), channels.tolist()):
                yield TimestampRecord(time_ps=time_ps, channel=channel)


def read_timestamps(source: Union[str, Path, TextIO]) -> Iterator[TimestampRecord]:
    """逐条产生时间戳记录"""
    with TimestampReader(source) as reader:
        yield from reader.records()


def _header_trials(header: Dict[str, str]) -> Optional[int]:
    if "trials" not in header:
        return None
    try:
        return int(header["trials"])
    except ValueError:
        raise FormatError(f"无效的试验数头部: {header['trials']}")


def parse_timestamps(
    source: Union[str, Path, TextIO],
    binning: BinningConfig,
    n_trials: Optional[int] = None,
    chunk_size: int = CHUNK_RECORDS,
) -> ParsedTimestamps:
    """按窗口归属把点击分配到每个试验的时间箱

    试验数取 n_trials, 其次取头部 trials, 最后按末个时间戳推断。
    """
    accepted = np.asarray(binning.channels, dtype=np.int64) if binning.channels is not None else None
    records = 0
    discarded = 0
    last_trial = -1
    with TimestampReader(source, chunk_size) as reader:
        if n_trials is None:
            n_trials = _header_trials(reader.header)
        grow = n_trials is None
        patterns = np.zeros(0 if grow else n_trials, dtype=np.int64)
        for times, channels in reader.chunks():
            records += times.size
            trial, offset = np.divmod(times, binning.period_ps)
            k = binning.bins_of(offset)
            keep = k >= 0
            if accepted is not None:
                keep &= np.isin(channels, accepted)
            if grow:
                last_trial = int(trial[-1])
                if last_trial >= patterns.size:
                    size = max(last_trial + 1, 2 * patterns.size)
                    patterns = np.concatenate([patterns, np.zeros(size - patterns.size, dtype=np.int64)])
            else:
                keep &= trial < n_trials
            discarded += int(times.size - np.count_nonzero(keep))
            np.bitwise_or.at(patterns, trial[keep], np.left_shift(1, k[keep]))
    if grow:
        n_trials = last_trial + 1
        patterns = patterns[:n_trials]

    logger.info("时间戳解析完成", records=records, trials=n_trials, discarded=discarded)
    return ParsedTimestamps(patterns=patterns, records=records, discarded=discarded)


def _pattern_table(config: ConfigKind, n_bins: int) -> np.ndarray:
    """掩码 -> 输出的查找表"""
    size = 1 << n_bins
    if config is ConfigKind.CONFIG_II:
        table = np.full(size, CONFIG2_INCONCLUSIVE, dtype=np.int64)
        for mask, b in CONFIG2_PATTERN_TO_OUTCOME.items():
            table[mask] = b
        return table
    table = np.full(size, n_bins, dtype=np.int64)
    for k in range(n_bins):
        table[1 << k] = k
    return table


def outcomes_from_patterns(
    patterns: Union[np.ndarray, Sequence[Iterable[int]]],
    config: ConfigKind,
    n_bins: int = 3,
) -> np.ndarray:
    """点击模式 -> 输出 b

    Config I: 只有时间箱 k 点击时 b=k, 否则为不确定结果 b=n_bins。
    Config II: 双击与单击按固定表映射, 空与三重点击为 b=6。
    """
    config = ConfigKind(config)
    if config is ConfigKind.CONFIG_II and n_bins != 3:
        raise DomainError("Config II 只有三个时间箱")
    masks = _as_masks(patterns)
    if masks.size and (masks.min() < 0 or masks.max() >= 1 << n_bins):
        raise DomainError(f"点击模式超出 {n_bins} 个时间箱")
    return _pattern_table(config, n_bins)[masks]


def _as_masks(patterns) -> np.ndarray:
    if isinstance(patterns, np.ndarray):
        return patterns.astype(np.int64)
    masks = []
    for pattern in patterns:
        if isinstance(pattern, (int, np.integer)):
            masks.append(int(pattern))
            continue
        mask = 0
        for k in pattern:
            mask |= 1 << int(k)
        masks.append(mask)
    return np.asarray(masks, dtype=np.int64)


def patterns_from_outcomes(outcomes: np.ndarray, config: ConfigKind, n_bins: int = 3) -> np.ndarray:
    """outcomes_from_patterns 的规范逆映射: 不确定结果取空模式"""
    config = ConfigKind(config)
    size = n_bins + 1 if config is ConfigKind.CONFIG_I else 7
    inverse = np.zeros(size, dtype=np.int64)
    if config is ConfigKind.CONFIG_II:
        for mask, b in CONFIG2_PATTERN_TO_OUTCOME.items():
            inverse[b] = mask
    else:
        for k in range(n_bins):
            inverse[k] = 1 << k
    return inverse[np.asarray(outcomes, dtype=np.int64)]


def write_timestamps(
    path: Union[str, Path],
    outcomes: np.ndarray,
    binning: BinningConfig,
    seed: Optional[int] = None,
    stray_rate: float = 0.0,
    channel: int = 0,
) -> int:
    """由输出序列生成合成时间戳文件, 返回写入的点击数

    每个点击在所属窗口内均匀抖动; stray_rate > 0 时按此概率在窗口外加入杂散点击。
    """
    rng = np.random.default_rng(seed)
    patterns = patterns_from_outcomes(outcomes, binning.config, binning.n_bins)
    gap = binning.gap_offset()
    if stray_rate > 0 and gap is None:
        raise DomainError("时间窗占满整个周期, 无法放置杂散点击")

    written = 0
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#version={FILE_VERSION}\n")
        f.write(f"#trials={len(patterns)}\n")
        for trial, mask in enumerate(patterns.tolist()):
            base = trial * binning.period_ps
            offsets = [
                binning.bin_offsets_ps[k] + int(rng.integers(0, binning.bin_width_ps))
                for k in range(binning.n_bins)
                if mask >> k & 1
            ]
            if stray_rate > 0 and rng.random() < stray_rate:
                offsets.append(gap)
            for offset in sorted(offsets):
                f.write(f"{base + offset},{channel}\n")
                written += 1
    logger.info("写入合成时间戳", path=str(path), trials=len(patterns), clicks=written)
    return written


def write_inputs(path: Union[str, Path], x: np.ndarray) -> None:
    """输入序列文件: 版本头部后每行一个 x"""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#version={FILE_VERSION}\n")
        f.write("\n".join(str(int(v)) for v in np.asarray(x).tolist()))
        f.write("\n")


def read_inputs(path: Union[str, Path], n: int) -> np.ndarray:
    """读取输入序列文件"""
    header: Dict[str, str] = {}
    values: List[int] = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                key, value = _header_entry(text, number)
                header[key] = value
                continue
            try:
                x = int(text)
            except ValueError:
                raise ParseError(f"无法解析输入符号: {text}", number)
            if not 0 <= x < n:
                raise ParseError(f"输入符号必须在[0,{n})之间: {x}", number)
            values.append(x)
    _check_version(header)
    return np.asarray(values, dtype=np.int64)


def ingest(
    timestamps: Union[str, Path],
    inputs: Union[str, Path],
    binning: BinningConfig,
    n_inputs: int,
) -> tuple:
    """时间戳文件 + 输入序列 -> (Trials, ParsedTimestamps)"""
    if n_inputs != binning.n_bins:
        raise DomainError(f"输入数 {n_inputs} 应等于时间箱数 {binning.n_bins}")
    x = read_inputs(inputs, n_inputs)
    parsed = parse_timestamps(timestamps, binning, n_trials=len(x))
    b = outcomes_from_patterns(parsed.patterns, binning.config, binning.n_bins)
    return Trials(n=n_inputs, d=binning.n_outcomes, x=x, b=b), parsed
