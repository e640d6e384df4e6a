"""
SDI-QRNG Cert
时间箱编码半设备无关量子随机数的熵认证与提取
"""
from core.config import settings
from core.stages import stage_registry
from core.workflow import pipeline_manager

__version__ = "1.0.0"
__all__ = [
    "settings",
    "stage_registry",
    "pipeline_manager",
]
