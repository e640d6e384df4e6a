"""
阶段共用的输入解析

阶段之间既可以通过 kwargs 传递内存对象 (流水线), 也可以通过输出目录中的文件衔接 (单独调用)。
"""
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from core.detection import ProbTable, Trials, empirical_table, model_table
from core.exceptions import FormatError
from core.formats import read_json, read_table, read_trials
from core.runconfig import RunConfig

TABLE_FILE = "table.json"
TRIALS_FILE = "trials.csv"
TIMESTAMPS_FILE = "timestamps.txt"
INPUTS_FILE = "inputs.txt"
POWER_FILE = "power.json"
CERT_RESULT_FILE = "cert_result.json"
CERTIFICATE_FILE = "certificate.json"
BITS_FILE = "bits.bin"
EXTRACTION_FILE = "extraction.json"


def resolve_trials(config: RunConfig, kwargs: Dict[str, Any]) -> Optional[Trials]:
    """kwargs 中的 trials, 其次 trials_file"""
    if kwargs.get("trials") is not None:
        return kwargs["trials"]
    if config.trials_file is not None:
        return read_trials(config.trials_file)
    return None


def resolve_table(config: RunConfig, kwargs: Dict[str, Any]) -> Tuple[ProbTable, str]:
    """返回 (概率表, 来源); 依次尝试 kwargs, table 文件, 试验记录, 模型"""
    if kwargs.get("table") is not None:
        return kwargs["table"], "memory"
    if config.table is not None:
        return read_table(config.table), str(config.table)
    trials = resolve_trials(config, kwargs)
    if trials is not None:
        table, _ = empirical_table(trials, trials.n, trials.d)
        return table, "trials"
    return model_table(config.experiment_params()), "model"


def resolve_h_min(config: RunConfig, kwargs: Dict[str, Any]) -> float:
    """kwargs 中的 h_min, 其次输出目录中的认证结果"""
    if kwargs.get("h_min") is not None:
        return float(kwargs["h_min"])
    path = Path(config.out) / CERT_RESULT_FILE
    if not path.is_file():
        raise FormatError(f"缺少最小熵: 未提供 h_min 且 {path} 不存在")
    payload = read_json(path, "认证结果")
    try:
        return float(payload["result"]["h_min"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"认证结果缺少 h_min: {e}") from e
