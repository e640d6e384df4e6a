"""
流水线管理模块

采集 (模拟或导入) -> 认证 (含能量界检查) -> 提取。每次运行的步骤状态与历史记录以 JSON 保存。
认证失败时不做提取, 写出零比特的比特文件, 运行状态为 failed。
"""
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from .config import settings
from .formats import write_bits, write_json
from .logger import get_logger
from .runconfig import RunConfig
from .stages import StageRegistry, StageResult, stage_registry

PIPELINE_REPORT_FILE = "pipeline.json"


class PipelineStep(BaseModel):
    """流水线步骤"""
    stage_name: str
    parameters: Dict[str, Any] = Field(default_factory=dict)
    status: str = "pending"
    result: Optional[Dict[str, Any]] = None
    error: Optional[str] = None
    start_time: Optional[datetime] = None
    end_time: Optional[datetime] = None


class PipelineRun(BaseModel):
    """一次流水线运行"""
    id: str
    name: str
    description: str
    steps: List[PipelineStep]
    status: str = "pending"
    created_at: datetime = Field(default_factory=datetime.now)
    updated_at: datetime = Field(default_factory=datetime.now)
    metadata: Dict[str, Any] = Field(default_factory=dict)
    history: List[Dict[str, Any]] = Field(default_factory=list)

    def step_output(self, stage_name: str) -> Optional[Dict[str, Any]]:
        for step in self.steps:
            if step.stage_name == stage_name:
                return step.result
        return None


def default_steps(config: RunConfig) -> List[PipelineStep]:
    """有时间戳文件时导入, 否则模拟"""
    first = "ingest" if config.timestamps is not None else "simulate"
    return [PipelineStep(stage_name=name) for name in (first, "certify", "extract")]


class PipelineManager:
    """流水线管理器"""

    def __init__(self, data_dir: Optional[Path] = None, registry: Optional[StageRegistry] = None):
        self._runs: Dict[str, PipelineRun] = {}
        self._logger = get_logger(__name__)
        self._data_dir = Path(data_dir) if data_dir else settings.get_data_dir() / "pipelines"
        self._registry = registry or stage_registry
        self._load_runs()

    def _load_runs(self) -> None:
        """加载已保存的运行记录"""
        if not self._data_dir.is_dir():
            return
        for file in sorted(self._data_dir.glob("*.json")):
            try:
                run = PipelineRun.model_validate_json(file.read_text(encoding="utf-8"))
                self._runs[run.id] = run
            except ValueError as e:
                self._logger.error("加载运行记录失败", file=str(file), error=str(e))

    def _save_run(self, run: PipelineRun) -> None:
        try:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            (self._data_dir / f"{run.id}.json").write_text(run.model_dump_json(indent=2), encoding="utf-8")
        except OSError as e:
            self._logger.error("保存运行记录失败", run=run.id, error=str(e))

    def create_run(self, name: str, description: str, steps: List[PipelineStep]) -> PipelineRun:
        """创建运行"""
        run = PipelineRun(
            id=f"run_{datetime.now():%Y%m%d%H%M%S}_{len(self._runs) + 1}",
            name=name,
            description=description,
            steps=steps,
        )
        self._runs[run.id] = run
        self._save_run(run)
        return run

    def get_run(self, run_id: str) -> Optional[PipelineRun]:
        return self._runs.get(run_id)

    def list_runs(self) -> List[PipelineRun]:
        return list(self._runs.values())

    def delete_run(self, run_id: str) -> bool:
        """删除运行记录"""
        if run_id not in self._runs:
            return False
        file = self._data_dir / f"{run_id}.json"
        if file.exists():
            file.unlink()
        del self._runs[run_id]
        return True

    def get_run_history(self, run_id: str) -> List[Dict[str, Any]]:
        if run := self._runs.get(run_id):
            return run.history
        return []

    def update_run_status(self, run: PipelineRun, status: str) -> None:
        run.status = status
        run.updated_at = datetime.now()
        self._save_run(run)

    def update_step_status(
        self,
        run: PipelineRun,
        step_index: int,
        status: str,
        result: Optional[Dict[str, Any]] = None,
        error: Optional[str] = None,
    ) -> None:
        """更新步骤状态并记录历史"""
        step = run.steps[step_index]
        step.status = status
        if status == "running":
            step.start_time = datetime.now()
        elif status in ("completed", "failed", "skipped"):
            step.end_time = datetime.now()
        if result is not None:
            step.result = result
        if error is not None:
            step.error = error

        run.history.append({
            "timestamp": datetime.now().isoformat(),
            "step_index": step_index,
            "stage": step.stage_name,
            "status": status,
            "error": error,
        })
        run.updated_at = datetime.now()
        self._save_run(run)

    def execute(self, config: RunConfig, steps: Optional[List[PipelineStep]] = None) -> PipelineRun:
        """顺序执行各步骤; 上一步的内存产物作为下一步的参数"""
        run = self.create_run("pipeline", "采集 -> 认证 -> 提取", steps or default_steps(config))
        self.update_run_status(run, "running")
        artifacts: Dict[str, Any] = {}
        failed: Optional[StageResult] = None

        for index, step in enumerate(run.steps):
            if failed is not None:
                self.update_step_status(run, index, "skipped")
                continue
            self.update_step_status(run, index, "running")
            result = self._registry.execute_stage(step.stage_name, config, **{**artifacts, **step.parameters})
            artifacts.update(result.artifacts)
            if result.success:
                self.update_step_status(run, index, "completed", result=result.output)
            else:
                self.update_step_status(run, index, "failed", result=result.output, error=result.error)
                failed = result
                self._logger.error("流水线步骤失败", run=run.id, stage=step.stage_name, error=result.error)

        out = config.out
        out.mkdir(parents=True, exist_ok=True)
        if failed is not None:
            # 认证失败按零熵处理: 输出零比特
            write_bits(out / "bits.bin", np.zeros(0, dtype=np.uint8))
            run.metadata["failure"] = {
                "stage": failed.metadata.get("stage"),
                "type": failed.metadata.get("type", "StageFailed"),
                "error": failed.error,
            }
        run.metadata["h_min"] = artifacts.get("h_min", 0.0)
        extraction = artifacts.get("extraction")
        run.metadata["output_bits"] = int(extraction.bits.size) if extraction is not None and failed is None else 0
        self.update_run_status(run, "failed" if failed is not None else "completed")

        write_json(out / PIPELINE_REPORT_FILE, {"pipeline": json.loads(run.model_dump_json())})
        self._logger.info("流水线完成", run=run.id, status=run.status, output_bits=run.metadata["output_bits"])
        return run


# 全局流水线管理器实例
pipeline_manager = PipelineManager()
