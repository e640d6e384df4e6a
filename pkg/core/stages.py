"""
阶段管理模块

每个命令行命令对应一个阶段。阶段返回 StageResult, 异常在注册表中统一捕获并转换。
"""
import time
from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Dict, List, Optional, Set, Type

from pydantic import BaseModel, ConfigDict, Field

from .exceptions import QrngError
from .logger import get_logger
from .runconfig import RunConfig


class StageCategory(str, Enum):
    """阶段类别"""
    MODEL = "model"
    CERTIFY = "certify"
    DATA = "data"
    EXTRACT = "extract"


class StageMetadata(BaseModel):
    """阶段元数据"""
    name: str
    description: str
    category: StageCategory
    version: str = "1.0.0"
    dependencies: List[str] = Field(default_factory=list)
    parameters: Dict[str, Any] = Field(default_factory=dict)


class StageResult(BaseModel):
    """阶段执行结果"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    success: bool
    output: Optional[Dict[str, Any]] = None
    error: Optional[str] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)
    execution_time: float = Field(default=0.0, description="执行时间(秒)")
    artifacts: Dict[str, Any] = Field(default_factory=dict, exclude=True, description="传给后续阶段的内存对象")

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


class BaseStage(ABC):
    """阶段基类"""

    def __init__(self):
        self.metadata = self.get_metadata()
        self._logger = get_logger(self.__class__.__name__)

    @abstractmethod
    def get_metadata(self) -> StageMetadata:
        """获取阶段元数据"""

    @abstractmethod
    def execute(self, config: RunConfig, **kwargs) -> StageResult:
        """执行阶段"""

    def validate_params(self, config: RunConfig, **kwargs) -> Optional[str]:
        """验证参数, 返回错误信息或 None"""
        return None

    def output_dir(self, config: RunConfig):
        config.out.mkdir(parents=True, exist_ok=True)
        return config.out


def error_result(error: Exception, stage: str) -> StageResult:
    """把异常转换为失败结果"""
    return StageResult(
        success=False,
        error=str(error),
        metadata={"stage": stage, "type": type(error).__name__},
    )


class StageRegistry:
    """阶段注册表"""

    def __init__(self):
        self._stages: Dict[str, Type[BaseStage]] = {}
        self._logger = get_logger(__name__)
        self._dependency_graph: Dict[str, Set[str]] = {}

    def register_stage(self, stage_class: Type[BaseStage]) -> None:
        """注册阶段"""
        metadata = stage_class().metadata
        if metadata.name in self._stages:
            self._logger.warning("阶段已存在, 将被覆盖", stage=metadata.name)
        self._stages[metadata.name] = stage_class
        self._dependency_graph[metadata.name] = set(metadata.dependencies)
        self._logger.debug("注册阶段", stage=metadata.name, version=metadata.version)

    def get_stage(self, name: str) -> Optional[Type[BaseStage]]:
        """获取阶段"""
        return self._stages.get(name)

    def list_stages(self) -> List[StageMetadata]:
        """列出所有阶段"""
        return [stage().get_metadata() for stage in self._stages.values()]

    def get_stages_by_category(self, category: StageCategory) -> List[StageMetadata]:
        """按类别获取阶段"""
        return [m for m in self.list_stages() if m.category == category]

    def check_dependencies(self, name: str) -> bool:
        """检查阶段依赖"""
        if name not in self._dependency_graph:
            return False
        return all(dep in self._stages for dep in self._dependency_graph[name])

    def get_stage_dependencies(self, name: str) -> Set[str]:
        """获取阶段依赖"""
        return self._dependency_graph.get(name, set())

    def get_dependent_stages(self, name: str) -> Set[str]:
        """获取依赖此阶段的阶段"""
        return {stage for stage, deps in self._dependency_graph.items() if name in deps}

    def execute_stage(self, name: str, config: RunConfig, **kwargs) -> StageResult:
        """执行阶段"""
        stage_class = self.get_stage(name)
        if not stage_class:
            return StageResult(success=False, error=f"阶段 {name} 不存在",
                               metadata={"stage": name, "type": "UnknownStage"})
        if not self.check_dependencies(name):
            return StageResult(success=False, error=f"阶段 {name} 的依赖不满足",
                               metadata={"stage": name, "type": "MissingDependency"})

        stage = stage_class()
        problem = stage.validate_params(config, **kwargs)
        if problem:
            return StageResult(success=False, error=f"阶段 {name} 的参数验证失败: {problem}",
                               metadata={"stage": name, "type": "InvalidParameters"})

        start = time.perf_counter()
        try:
            result = stage.execute(config, **kwargs)
        except QrngError as e:
            self._logger.error("阶段执行失败", stage=name, error=str(e), type=type(e).__name__)
            result = error_result(e, name)
        except (ValueError, OSError) as e:
            self._logger.exception("阶段执行异常", stage=name)
            result = error_result(e, name)
        result.execution_time = time.perf_counter() - start
        result.metadata.setdefault("stage", name)
        return result


# 全局阶段注册表实例
stage_registry = StageRegistry()
