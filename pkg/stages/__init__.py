"""
阶段模块

每个阶段对应一个命令行命令, register_all 把它们登记到全局注册表。
"""
from core.stages import StageRegistry, stage_registry

from .certify_stages import CertifyStage, OptimalMuStage, ReproduceStage, SweepStage
from .data_stages import ExtractStage, IngestStage
from .model_stages import SimulateStage, TabulateStage
from .pipeline_stages import PipelineStage

ALL_STAGES = [
    TabulateStage,
    SimulateStage,
    IngestStage,
    CertifyStage,
    SweepStage,
    OptimalMuStage,
    ExtractStage,
    ReproduceStage,
    PipelineStage,
]


def register_all(registry: StageRegistry = stage_registry) -> StageRegistry:
    """注册全部阶段"""
    for stage in ALL_STAGES:
        if registry.get_stage(stage().metadata.name) is None:
            registry.register_stage(stage)
    return registry


__all__ = [
    "ALL_STAGES",
    "CertifyStage",
    "ExtractStage",
    "IngestStage",
    "OptimalMuStage",
    "PipelineStage",
    "ReproduceStage",
    "SimulateStage",
    "SweepStage",
    "TabulateStage",
    "register_all",
]
