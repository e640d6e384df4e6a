"""
API路由模块
"""
from typing import Any, Dict, List, Optional

from fastapi import APIRouter, Depends, HTTPException, status
from pydantic import BaseModel, Field, ValidationError

from core.certification import certify, check_energy_bound, evaluate_certificate
from core.engine import SolveOptions
from core.exceptions import QrngError
from core.formats import cert_result_to_dict, certificate_from_dict, certificate_to_dict, table_from_dict
from core.monitor import PowerRecord
from core.runconfig import RunConfig
from core.stages import StageRegistry, stage_registry
from core.states import OverlapKind
from core.workflow import PipelineManager, PipelineRun, pipeline_manager

router = APIRouter()


class StageRequest(BaseModel):
    """阶段请求模型"""
    name: str
    config: Dict[str, Any] = Field(default_factory=dict, description="RunConfig 字段")
    parameters: Dict[str, Any] = Field(default_factory=dict, description="阶段附加参数")


class CertifyRequest(BaseModel):
    """认证请求模型"""
    table: Dict[str, Any]
    mu: float = Field(ge=0.0)
    model: OverlapKind = OverlapKind.ENERGY
    slack_sigma: Optional[float] = Field(default=None, ge=0.0)
    use_symmetry: bool = False
    options: Optional[SolveOptions] = None


class EvaluateRequest(BaseModel):
    """证书复用请求模型"""
    table: Dict[str, Any]
    certificate: Dict[str, Any]
    slack_sigma: Optional[float] = Field(default=None, ge=0.0)


class EnergyRequest(BaseModel):
    """能量界检查请求模型"""
    mu: float = Field(ge=0.0)
    records: List[PowerRecord]


async def get_stage_registry() -> StageRegistry:
    """获取阶段注册表"""
    return stage_registry


async def get_pipeline_manager() -> PipelineManager:
    """获取流水线管理器"""
    return pipeline_manager


def _bad_request(e: Exception) -> HTTPException:
    return HTTPException(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        detail={"error": str(e), "type": type(e).__name__},
    )


@router.get("/stages", response_model=List[Dict[str, Any]])
async def list_stages(registry: StageRegistry = Depends(get_stage_registry)) -> List[Dict[str, Any]]:
    """列出所有阶段"""
    return [m.model_dump(mode="json") for m in registry.list_stages()]


@router.post("/stages/execute", response_model=Dict[str, Any])
def execute_stage(
    request: StageRequest,
    registry: StageRegistry = Depends(get_stage_registry),
) -> Dict[str, Any]:
    """执行阶段"""
    if registry.get_stage(request.name) is None:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=f"阶段 {request.name} 不存在")
    try:
        config = RunConfig.load(overrides=request.config)
    except QrngError as e:
        raise _bad_request(e)
    return registry.execute_stage(request.name, config, **request.parameters).to_dict()


@router.post("/certify", response_model=Dict[str, Any])
def certify_table(request: CertifyRequest) -> Dict[str, Any]:
    """认证一张概率表"""
    try:
        table = table_from_dict(request.table)
        result = certify(table, request.mu, request.model, request.options, request.slack_sigma,
                         use_symmetry=request.use_symmetry)
    except (QrngError, ValueError) as e:
        raise _bad_request(e)
    return {
        "result": cert_result_to_dict(result),
        "certified": result.certified,
        "certificate": certificate_to_dict(result.certificate) if result.certificate else None,
    }


@router.post("/certificates/evaluate", response_model=Dict[str, Any])
def evaluate(request: EvaluateRequest) -> Dict[str, Any]:
    """用已保存的证书给新表定界"""
    try:
        table = table_from_dict(request.table)
        certificate = certificate_from_dict(request.certificate)
        result = evaluate_certificate(table, certificate, request.slack_sigma)
    except (QrngError, ValueError) as e:
        raise _bad_request(e)
    return {"result": cert_result_to_dict(result), "certified": result.certified}


@router.post("/energy/check", response_model=Dict[str, Any])
async def energy_check(request: EnergyRequest) -> Dict[str, Any]:
    """检查功率监测记录是否满足 μ 界"""
    try:
        report = check_energy_bound(request.records, request.mu)
    except (QrngError, ValidationError) as e:
        raise _bad_request(e)
    return report.model_dump(mode="json")


@router.get("/pipelines", response_model=List[PipelineRun])
async def list_pipelines(manager: PipelineManager = Depends(get_pipeline_manager)) -> List[PipelineRun]:
    """列出流水线运行记录"""
    return manager.list_runs()


@router.get("/pipelines/{run_id}", response_model=PipelineRun)
async def get_pipeline(run_id: str, manager: PipelineManager = Depends(get_pipeline_manager)) -> PipelineRun:
    """获取流水线运行记录"""
    run = manager.get_run(run_id)
    if not run:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=f"运行 {run_id} 不存在")
    return run


@router.delete("/pipelines/{run_id}")
async def delete_pipeline(run_id: str, manager: PipelineManager = Depends(get_pipeline_manager)) -> Dict[str, Any]:
    """删除流水线运行记录"""
    if not manager.delete_run(run_id):
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=f"运行 {run_id} 不存在")
    return {"success": True}
