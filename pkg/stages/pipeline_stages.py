"""
流水线阶段
"""
from core.runconfig import RunConfig
from core.stages import BaseStage, StageCategory, StageMetadata, StageResult
from core.workflow import pipeline_manager


class PipelineStage(BaseStage):
    """采集, 认证与提取的完整流程"""

    def get_metadata(self) -> StageMetadata:
        return StageMetadata(
            name="pipeline",
            description="模拟或导入数据, 检查能量界并认证, 然后提取随机比特",
            category=StageCategory.EXTRACT,
            dependencies=["simulate", "ingest", "certify", "extract"],
        )

    def execute(self, config: RunConfig, **kwargs) -> StageResult:
        run = pipeline_manager.execute(config)
        failure = run.metadata.get("failure")
        return StageResult(
            success=run.status == "completed",
            output={
                "run_id": run.id,
                "status": run.status,
                "h_min": run.metadata.get("h_min", 0.0),
                "output_bits": run.metadata.get("output_bits", 0),
                "steps": [{"stage": s.stage_name, "status": s.status, "error": s.error} for s in run.steps],
            },
            error=failure["error"] if failure else None,
            metadata={"type": failure["type"]} if failure else {},
        )
