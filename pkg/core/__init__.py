"""
核心模块
"""

from .config import settings
from .stages import stage_registry
from .workflow import pipeline_manager

__all__ = [
    "settings",
    "stage_registry",
    "pipeline_manager",
]
