"""
数据导入与随机数提取阶段
"""
from typing import Optional

import numpy as np

from core.detection import empirical_table
from core.exceptions import EstimationError
from core.extraction import (
    ToeplitzSeed,
    extract_blocks,
    outcome_encoding,
    plan_blocks,
    symbol_width,
)
from core.formats import read_bits, write_bits, write_json, write_table, write_trials
from core.runconfig import RunConfig
from core.stages import BaseStage, StageCategory, StageMetadata, StageResult
from core.timestamps import ingest
from .common import BITS_FILE, EXTRACTION_FILE, TABLE_FILE, TRIALS_FILE, resolve_h_min, resolve_trials


class IngestStage(BaseStage):
    """时间戳文件 -> 试验记录与频率表"""

    def get_metadata(self) -> StageMetadata:
        return StageMetadata(
            name="ingest",
            description="按时间箱解析时间戳文件, 与输入序列配对得到试验记录",
            category=StageCategory.DATA,
            parameters={
                "timestamps": {"type": "string", "description": "时间戳文件"},
                "inputs": {"type": "string", "description": "输入序列文件"},
                "period_ps": {"type": "integer"},
                "bin_offsets_ps": {"type": "array"},
                "bin_width_ps": {"type": "integer"},
            },
        )

    def validate_params(self, config: RunConfig, **kwargs) -> Optional[str]:
        if config.timestamps is None or config.inputs is None:
            return "需要 timestamps 与 inputs 文件"
        return None

    def execute(self, config: RunConfig, **kwargs) -> StageResult:
        binning = config.binning()
        trials, parsed = ingest(config.timestamps, config.inputs, binning, binning.n_bins)
        table, counts = empirical_table(trials, trials.n, trials.d)

        out = self.output_dir(config)
        write_trials(out / TRIALS_FILE, trials)
        write_table(out / TABLE_FILE, table)
        return StageResult(
            success=True,
            output={
                "trials": len(trials),
                "records": parsed.records,
                "discarded": parsed.discarded,
                "counts": counts.tolist(),
                "files": [str(out / TRIALS_FILE), str(out / TABLE_FILE)],
            },
            artifacts={"trials": trials, "table": table},
        )


class ExtractStage(BaseStage):
    """Toeplitz 提取"""

    def get_metadata(self) -> StageMetadata:
        return StageMetadata(
            name="extract",
            description="按认证的最小熵对原始输出做 Toeplitz 哈希",
            category=StageCategory.EXTRACT,
            parameters={
                "trials_file": {"type": "string", "description": "试验记录"},
                "seed_file": {"type": "string", "description": "独立的种子比特文件; 缺省时用伪随机种子 (仅限模拟)"},
                "eps_sec": {"type": "number", "description": "安全参数"},
                "h_min": {"type": "number", "description": "每次测量的最小熵, 缺省读取认证结果"},
            },
        )

    def execute(self, config: RunConfig, **kwargs) -> StageResult:
        trials = resolve_trials(config, kwargs)
        if trials is None:
            raise EstimationError("没有可提取的试验记录")
        h_min = resolve_h_min(config, kwargs)

        raw = outcome_encoding(trials, trials.d)
        width = symbol_width(trials.d)
        blocks = plan_blocks(len(raw), h_min, width, config.eps_sec, config.block_bits)
        required = sum(b.seed_bits for b in blocks)
        out = self.output_dir(config)
        if required == 0:
            self._logger.warning("最小熵不足以提取任何比特", h_min=h_min, input_bits=len(raw))
            write_bits(out / BITS_FILE, np.zeros(0, dtype=np.uint8))
            return StageResult(
                success=True,
                output={"output_bits": 0, "h_min_per_symbol": h_min, "input_bits": len(raw), "eps_total": 0.0,
                        "files": [str(out / BITS_FILE)]},
            )

        if config.seed_file is not None:
            seed = ToeplitzSeed(bits=read_bits(config.seed_file))
            independent = True
        else:
            self._logger.warning("未提供种子文件, 使用伪随机种子; 输出只能用于模拟")
            seed = ToeplitzSeed.random(required, config.seed)
            independent = False

        result = extract_blocks(raw, seed, h_min, width, config.eps_sec, config.block_bits)
        result = result.model_copy(update={"seed_independent": independent})

        write_bits(out / BITS_FILE, result.bits)
        metadata = {**result.metadata(), "input_bits": len(raw), "encoding": raw.origin}
        write_json(out / EXTRACTION_FILE, {"extraction": metadata})
        return StageResult(
            success=True,
            output={**metadata, "files": [str(out / BITS_FILE), str(out / EXTRACTION_FILE)]},
            artifacts={"extraction": result},
        )
