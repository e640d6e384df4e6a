"""
测试配置文件
"""
import os
import tempfile
from pathlib import Path
from typing import Callable, Generator

# 流水线记录写到临时目录, 必须在导入 core 之前设置
os.environ.setdefault("DATA_DIR", str(Path(tempfile.gettempdir()) / "qrng-cert-tests"))

import numpy as np
import pytest
from fastapi.testclient import TestClient

from core.detection import ConfigKind, ExperimentParams, ProbTable, model_table
from core.engine import SolveOptions
from core.runconfig import RunConfig
from core.stages import StageRegistry, stage_registry
from core.states import build_states
from stages import register_all


@pytest.fixture(scope="session")
def registry() -> StageRegistry:
    """注册全部阶段的全局注册表"""
    return register_all(stage_registry)


@pytest.fixture
def client(registry) -> Generator[TestClient, None, None]:
    """HTTP 测试客户端"""
    from main import app

    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture
def options() -> SolveOptions:
    """测试用求解选项"""
    return SolveOptions(gap_tol=1e-7, feas_tol=1e-8, max_iters=500)


@pytest.fixture
def make_config(tmp_path: Path) -> Callable[..., RunConfig]:
    """输出目录位于临时目录的运行配置"""

    def factory(**changes) -> RunConfig:
        return RunConfig(out=tmp_path / "out", **changes)

    return factory


@pytest.fixture
def config1_params() -> ExperimentParams:
    return ExperimentParams(config=ConfigKind.CONFIG_I, n_inputs=3, mu=0.18, eta=1.0, epsilon=1e-5)


@pytest.fixture
def config2_params() -> ExperimentParams:
    return ExperimentParams(config=ConfigKind.CONFIG_II, n_inputs=3, mu=0.164, eta=1.0, epsilon=1e-4)


@pytest.fixture
def config1_table(config1_params) -> ProbTable:
    return model_table(config1_params)


@pytest.fixture
def binary_table() -> ProbTable:
    """n=2, d=2 的对称表"""
    return ProbTable(n=2, d=2, p=np.array([[0.9, 0.1], [0.1, 0.9]]))


@pytest.fixture
def binary_states():
    """两两重叠 0.6 的两态"""
    return build_states(2, 0.6)
