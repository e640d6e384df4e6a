"""
文件格式模块

所有输出文件都带版本号, 读取时拒绝未知版本:
- JSON (证书, 认证结果, 报告): 顶层 "version" 字段
- CSV 曲线与试验记录: 首行 "#version=1"
- 比特文件: 结构化头部 (魔数, 版本, 比特数) 后接 MSB 优先的打包字节
"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from .certification import CertResult, SweepCurve
from .detection import ProbTable, Trials
from .engine import DualCertificate, SolveStatus
from .monitor import PowerRecord
from .exceptions import FormatError, ParseError
from .logger import get_logger
from .states import OverlapKind

logger = get_logger(__name__)

FORMAT_VERSION = 1
CURVE_HEADER = "axis,value,h_min,p_guess,status,slack"
TRIALS_HEADER = "x,b"
BITS_MAGIC = b"QRNGBITS"
BITS_HEADER = struct.Struct(">8sHQ")

PathLike = Union[str, Path]


def _check_json_version(payload: Dict[str, Any], what: str) -> None:
    version = payload.get("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"不支持的{what}版本: {version}")


def write_json(path: PathLike, payload: Dict[str, Any]) -> None:
    """写入带版本号的 JSON"""
    payload = {"version": FORMAT_VERSION, **payload}
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=2, allow_nan=True), encoding="utf-8")


def read_json(path: PathLike, what: str = "JSON 文件") -> Dict[str, Any]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{what}不是有效的 JSON: {e}") from e
    if not isinstance(payload, dict):
        raise FormatError(f"{what}顶层必须是对象")
    _check_json_version(payload, what)
    return payload


# 证书

def certificate_to_dict(certificate: DualCertificate) -> Dict[str, Any]:
    return certificate.to_json_dict()


def certificate_from_dict(payload: Dict[str, Any]) -> DualCertificate:
    _check_json_version(payload, "证书")
    missing = [k for k in ("nu", "H", "mu", "delta_model", "table_hash", "n", "d") if k not in payload]
    if missing:
        raise FormatError(f"证书缺少字段: {missing}")
    try:
        return DualCertificate(
            n=int(payload["n"]),
            d=int(payload["d"]),
            reduced=bool(payload.get("reduced", False)),
            nu=payload["nu"],
            H=payload["H"],
            unit_shift=payload.get("unit_shift", np.ones(len(payload["nu"]))),
            mu=payload["mu"],
            delta_model=payload["delta_model"],
            delta=payload.get("delta"),
            table_hash=payload["table_hash"],
            energy_checked=payload.get("energy_checked"),
        )
    except (TypeError, ValueError) as e:
        raise FormatError(f"证书字段无效: {e}") from e


def write_certificate(path: PathLike, certificate: DualCertificate) -> None:
    Path(path).write_text(json.dumps(certificate_to_dict(certificate)), encoding="utf-8")


def read_certificate(path: PathLike) -> DualCertificate:
    return certificate_from_dict(read_json(path, "证书"))


# 认证结果与概率表

def cert_result_to_dict(result: CertResult) -> Dict[str, Any]:
    return result.model_dump(mode="json")


def table_to_dict(table: ProbTable) -> Dict[str, Any]:
    return table.to_dict()


def table_from_dict(payload: Dict[str, Any]) -> ProbTable:
    try:
        return ProbTable(n=payload["n"], d=payload["d"], p=payload["p"], counts=payload.get("counts"))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"概率表字段无效: {e}") from e


def write_table(path: PathLike, table: ProbTable) -> None:
    write_json(path, {"table": table_to_dict(table)})


def read_table(path: PathLike) -> ProbTable:
    payload = read_json(path, "概率表")
    if "table" not in payload:
        raise FormatError("概率表文件缺少 table 字段")
    return table_from_dict(payload["table"])


# CSV 曲线

def write_curve(path: PathLike, curve: SweepCurve) -> None:
    """axis,value,h_min,p_guess,status,slack; 浮点数以 repr 写出以便无损读回"""
    lines = [f"#version={FORMAT_VERSION}", CURVE_HEADER]
    for point, result in zip(curve.points, curve.results):
        lines.append(",".join([
            curve.axis,
            repr(float(point)),
            repr(float(result.h_min)),
            repr(float(result.p_guess)),
            result.status.value,
            repr(float(result.slack_used)),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug("写入曲线", path=str(path), points=len(curve.points))


def read_curve_rows(path: PathLike) -> List[Dict[str, Any]]:
    """读取曲线文件的各行"""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != f"#version={FORMAT_VERSION}":
        raise FormatError(f"曲线文件版本头部无效: {lines[0] if lines else ''}")
    if len(lines) < 2 or lines[1].strip() != CURVE_HEADER:
        raise FormatError("曲线文件表头无效")
    rows = []
    for number, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise ParseError("曲线行应有6列", number)
        try:
            rows.append({
                "axis": parts[0],
                "value": float(parts[1]),
                "h_min": float(parts[2]),
                "p_guess": float(parts[3]),
                "status": SolveStatus(parts[4]),
                "slack": float(parts[5]),
            })
        except ValueError as e:
            raise ParseError(f"无法解析曲线行: {e}", number) from e
    return rows


def read_curve(path: PathLike, model: OverlapKind = OverlapKind.ENERGY) -> SweepCurve:
    """读回曲线; 逐点结果只含曲线文件中的字段"""
    rows = read_curve_rows(path)
    if not rows:
        raise FormatError("曲线文件没有数据行")
    axes = {row["axis"] for row in rows}
    if len(axes) != 1:
        raise FormatError(f"曲线文件包含多个坐标轴: {sorted(axes)}")
    results = [
        CertResult(
            p_guess=row["p_guess"],
            h_min=row["h_min"],
            mu=row["value"] if row["axis"] == "mu" else float("nan"),
            model=model,
            delta=float("nan"),
            slack_used=row["slack"],
            status=row["status"],
        )
        for row in rows
    ]
    return SweepCurve(axis=rows[0]["axis"], points=[row["value"] for row in rows], results=results)


# 试验记录

def write_trials(path: PathLike, trials: Trials) -> None:
    """#version=1, #n=, #d= 头部后每行 x,b"""
    body = np.column_stack([trials.x, trials.b])
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#version={FORMAT_VERSION}\n#n={trials.n}\n#d={trials.d}\n{TRIALS_HEADER}\n")
        np.savetxt(f, body, fmt="%d", delimiter=",")


def read_trials(path: PathLike) -> Trials:
    header: Dict[str, str] = {}
    xs: List[int] = []
    bs: List[int] = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                key, _, value = text[1:].partition("=")
                header[key.strip()] = value.strip()
                continue
            if text == TRIALS_HEADER:
                continue
            parts = text.split(",")
            try:
                x, b = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise ParseError(f"应为 x,b: {text}", number)
            xs.append(x)
            bs.append(b)
    if header.get("version") != str(FORMAT_VERSION):
        raise FormatError(f"不支持的试验文件版本: {header.get('version')}")
    try:
        return Trials(n=int(header["n"]), d=int(header["d"]), x=xs, b=bs)
    except (KeyError, ValueError) as e:
        raise FormatError(f"试验文件头部或内容无效: {e}") from e


# 比特文件

def write_bits(path: PathLike, bits: np.ndarray) -> None:
    """头部 (魔数, 版本, 比特数) + MSB 优先打包, 末字节补零"""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    with open(path, "wb") as f:
        f.write(BITS_HEADER.pack(BITS_MAGIC, FORMAT_VERSION, bits.size))
        f.write(np.packbits(bits, bitorder="big").tobytes())


def read_bits(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < BITS_HEADER.size:
        raise FormatError("比特文件过短")
    magic, version, length = BITS_HEADER.unpack_from(data)
    if magic != BITS_MAGIC:
        raise FormatError("比特文件魔数无效")
    if version != FORMAT_VERSION:
        raise FormatError(f"不支持的比特文件版本: {version}")
    payload = np.frombuffer(data, dtype=np.uint8, offset=BITS_HEADER.size)
    if payload.size != (length + 7) // 8:
        raise FormatError(f"比特文件长度与头部不符: {payload.size} 字节, 头部 {length} 比特")
    return np.unpackbits(payload, count=length, bitorder="big")


# 功率监测记录

def write_power_records(path: PathLike, records: List[PowerRecord]) -> None:
    write_json(path, {"records": [r.model_dump(mode="json") for r in records]})


def read_power_records(path: PathLike) -> List[PowerRecord]:
    payload = read_json(path, "功率记录")
    try:
        return [PowerRecord(**item) for item in payload["records"]]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"功率记录无效: {e}") from e
