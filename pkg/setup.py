"""
项目安装配置文件
"""
from setuptools import find_packages, setup


setup(
    name="sdi-qrng-cert",
    version="1.0.0",
    description="时间箱编码半设备无关量子随机数的熵认证与提取",
    long_description=open("README.md", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    py_modules=["cli", "main"],
    include_package_data=True,
    python_requires=">=3.10",
    install_requires=[
        # Web框架
        "fastapi>=0.100.0",
        "uvicorn>=0.22.0",
        "pydantic>=2.0.0",
        "pydantic-settings>=2.0.0",
        "python-dotenv>=1.0.0",

        # 数值计算与锥规划
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "cvxpy>=1.4.0",
        "clarabel>=0.6.0",
        "scs>=3.2.0",

        # 日志
        "structlog>=23.1.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
            "httpx>=0.24.0",
            "black>=23.7.0",
            "isort>=5.12.0",
            "mypy>=1.5.1",
        ],
        "test": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
            "httpx>=0.24.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "qrng-cert=cli:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Physics",
        "Framework :: FastAPI",
        "Typing :: Typed",
    ],
    keywords=[
        "qrng",
        "randomness",
        "semidefinite-programming",
        "min-entropy",
        "toeplitz",
    ],
)
