"""
API模块
"""
from .routes import router

__all__ = ["router"]
