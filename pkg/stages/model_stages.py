"""
模型与模拟阶段
"""
from core.detection import ConfigKind, empirical_table, model_table, simulate_trials
from core.formats import write_power_records, write_table, write_trials
from core.monitor import simulate_power_records
from core.runconfig import RunConfig
from core.stages import BaseStage, StageCategory, StageMetadata, StageResult
from core.timestamps import write_inputs, write_timestamps
from .common import INPUTS_FILE, POWER_FILE, TABLE_FILE, TIMESTAMPS_FILE, TRIALS_FILE


class TabulateStage(BaseStage):
    """模型概率表"""

    def get_metadata(self) -> StageMetadata:
        return StageMetadata(
            name="tabulate",
            description="按探测模型计算 p(b|x) 概率表",
            category=StageCategory.MODEL,
            parameters={
                "config": {"type": "string", "description": "I 或 II"},
                "mu": {"type": "number", "description": "平均光子数"},
                "eta": {"type": "number", "description": "探测效率"},
                "eps": {"type": "number", "description": "噪声点击概率"},
            },
        )

    def execute(self, config: RunConfig, **kwargs) -> StageResult:
        params = config.experiment_params()
        table = model_table(params)
        path = self.output_dir(config) / TABLE_FILE
        write_table(path, table)
        self._logger.info("概率表已写入", path=str(path), n=table.n, d=table.d)
        return StageResult(
            success=True,
            output={"table": table.to_dict(), "path": str(path)},
            artifacts={"table": table},
        )


class SimulateStage(BaseStage):
    """模拟试验, 时间戳文件与功率监测记录"""

    def get_metadata(self) -> StageMetadata:
        return StageMetadata(
            name="simulate",
            description="从模型表抽样试验, 并写出合成时间戳, 输入序列与功率记录",
            category=StageCategory.MODEL,
            dependencies=["tabulate"],
            parameters={
                "trials": {"type": "integer", "description": "试验次数"},
                "seed": {"type": "integer", "description": "随机种子"},
                "power_noise": {"type": "number", "description": "功率读数的相对噪声"},
            },
        )

    def validate_params(self, config: RunConfig, **kwargs):
        if config.config is ConfigKind.CONFIG_II and len(config.bin_offsets_ps) != 3:
            return "Config II 需要三个时间箱"
        if config.config is ConfigKind.CONFIG_I and len(config.bin_offsets_ps) != config.n_inputs:
            return f"时间箱数 {len(config.bin_offsets_ps)} 应等于输入数 {config.n_inputs}"
        return None

    def execute(self, config: RunConfig, **kwargs) -> StageResult:
        params = config.experiment_params()
        model = model_table(params)
        trials = simulate_trials(model, config.trials, config.seed)
        table, counts = empirical_table(trials, model.n, model.d)

        out = self.output_dir(config)
        write_trials(out / TRIALS_FILE, trials)
        write_table(out / TABLE_FILE, table)
        clicks = write_timestamps(out / TIMESTAMPS_FILE, trials.b, config.binning(), seed=config.seed)
        write_inputs(out / INPUTS_FILE, trials.x)

        # 设定值留出 4 倍噪声的余量, 读数才会稳定落在界内
        set_point = config.mu * max(0.0, 1.0 - 4.0 * config.power_noise)
        power = simulate_power_records(model.n, set_point, config.power_records, config.seed, config.power_noise)
        write_power_records(out / POWER_FILE, power)

        return StageResult(
            success=True,
            output={
                "trials": len(trials),
                "clicks": clicks,
                "counts": counts.tolist(),
                "table": table.to_dict(),
                "files": [str(out / f) for f in (TRIALS_FILE, TABLE_FILE, TIMESTAMPS_FILE, INPUTS_FILE, POWER_FILE)],
            },
            artifacts={"trials": trials, "table": table, "power_records": power},
        )
