"""
主程序

HTTP 服务: 阶段执行, 认证, 证书复用与流水线记录查询。
"""
from contextlib import asynccontextmanager
from typing import Any, Dict

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from api import router as api_router
from core.config import settings
from core.logger import configure_logging, get_logger
from core.stages import stage_registry
from stages import register_all

configure_logging()
logger = get_logger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info("正在启动服务", name=settings.APP_NAME, version=settings.APP_VERSION)
    register_all()
    logger.info("阶段注册完成", stages=len(stage_registry.list_stages()))
    yield
    logger.info("正在关闭服务")


# 创建FastAPI应用
app = FastAPI(
    title=settings.APP_NAME,
    description="时间箱编码半设备无关量子随机数的熵认证与提取",
    version=settings.APP_VERSION,
    lifespan=lifespan,
)

# 配置CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(api_router, prefix="/api/v1")


@app.get("/")
async def root() -> Dict[str, Any]:
    """根路径"""
    return {
        "name": settings.APP_NAME,
        "version": settings.APP_VERSION,
        "description": "时间箱编码半设备无关量子随机数的熵认证与提取",
    }


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("main:app", host=settings.HOST, port=settings.PORT, reload=settings.DEBUG, workers=1)
