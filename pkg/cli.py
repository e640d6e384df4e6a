"""
命令行入口

每个子命令执行一个阶段, 结果 JSON 写到标准输出。阶段失败时退出码非零,
并在标准错误输出 {"error", "stage", "type"}。
"""
import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from core.config import settings
from core.exceptions import QrngError
from core.logger import configure_logging, get_logger
from core.runconfig import RunConfig
from core.stages import stage_registry
from stages import register_all

logger = get_logger(__name__)

# 命令行参数名 -> RunConfig 字段
FLAG_FIELDS = {
    "config": "config",
    "mu": "mu",
    "eta": "eta",
    "eps": "eps",
    "model": "model",
    "n_inputs": "n_inputs",
    "loss_fold": "loss_fold",
    "trials": "trials",
    "seed": "seed",
    "eps_sec": "eps_sec",
    "out": "out",
    "slack_sigma": "slack_sigma",
    "solver": "solver",
    "gap_tol": "gap_tol",
    "max_iters": "max_iters",
    "workers": "workers",
    "symmetry": "use_symmetry",
    "no_primal": "solve_primal",
    "mu_min": "mu_min",
    "mu_max": "mu_max",
    "mu_step": "mu_step",
    "eta_grid": "eta_grid",
    "n_values": "n_values",
    "bracket": "bracket",
    "tol": "tol",
    "table": "table",
    "trials_file": "trials_file",
    "certificate": "certificate",
    "timestamps": "timestamps",
    "inputs": "inputs",
    "seed_file": "seed_file",
    "power_file": "power_file",
    "require_energy_check": "require_energy_check",
    "block_bits": "block_bits",
    "period_ps": "period_ps",
    "bin_offsets_ps": "bin_offsets_ps",
    "bin_width_ps": "bin_width_ps",
}

COMMANDS = {
    "tabulate": "按探测模型计算概率表",
    "simulate": "模拟试验并写出试验记录, 时间戳与功率记录",
    "certify": "认证一张概率表的最小熵",
    "sweep": "μ / η / 输入数扫描, 写出 CSV 曲线",
    "optimal-mu": "搜索使最小熵最大的 μ",
    "ingest": "解析时间戳文件得到试验记录",
    "extract": "按认证的最小熵做 Toeplitz 提取",
    "pipeline": "采集 -> 能量检查 -> 认证 -> 提取",
    "reproduce": "复现已发表的曲线数值",
}


def _common_parser() -> argparse.ArgumentParser:
    """所有子命令共用的参数; 缺省值为 None 时取 RunConfig 默认值"""
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("实验参数")
    g.add_argument("--config", choices=["I", "II"], help="时间箱编码配置")
    g.add_argument("--mu", type=float, help="平均光子数 (能量界) 或重叠参数")
    g.add_argument("--eta", type=float, help="探测效率")
    g.add_argument("--eps", type=float, help="每个空箱的噪声点击概率")
    g.add_argument("--model", choices=["energy", "overlap"], help="重叠模型")
    g.add_argument("--n-inputs", type=int, help="输入数 (仅 Config I)")
    g.add_argument("--loss-fold", choices=["poisson", "linear"], help="效率并入真空概率的方式")

    g = p.add_argument_group("求解")
    g.add_argument("--solver", choices=["CLARABEL", "SCS"], help="锥规划求解器")
    g.add_argument("--gap-tol", type=float, help="对偶间隙容差")
    g.add_argument("--max-iters", type=int, help="最大迭代次数")
    g.add_argument("--workers", type=int, help="扫描并行进程数")
    g.add_argument("--symmetry", action="store_true", default=None, help="尝试对称约化")
    g.add_argument("--no-primal", action="store_false", default=None, help="只解对偶问题")
    g.add_argument("--slack-sigma", type=float, help="经验表约束松弛的标准误倍数")

    g = p.add_argument_group("扫描")
    g.add_argument("--mu-min", type=float)
    g.add_argument("--mu-max", type=float)
    g.add_argument("--mu-step", type=float)
    g.add_argument("--eta-grid", help="逗号分隔的 η 列表")
    g.add_argument("--n-values", help="逗号分隔的输入数列表")
    g.add_argument("--bracket", help="最优 μ 搜索区间 lo,hi")
    g.add_argument("--tol", type=float, help="最优 μ 搜索容差")

    g = p.add_argument_group("数据与文件")
    g.add_argument("--trials", type=int, help="模拟试验次数")
    g.add_argument("--seed", type=int, help="随机种子")
    g.add_argument("--eps-sec", type=float, help="提取安全参数")
    g.add_argument("--block-bits", type=int, help="每个提取块的最大输入比特数")
    g.add_argument("--out", help="输出目录")
    g.add_argument("--table", help="概率表 JSON")
    g.add_argument("--trials-file", help="试验记录 CSV")
    g.add_argument("--certificate", help="复用的对偶证书 JSON")
    g.add_argument("--timestamps", help="时间戳文件")
    g.add_argument("--inputs", help="输入序列文件")
    g.add_argument("--seed-file", help="Toeplitz 种子比特文件")
    g.add_argument("--power-file", help="功率监测记录 JSON")
    g.add_argument("--require-energy-check", action="store_true", default=None, help="没有功率记录时拒绝认证")
    g.add_argument("--period-ps", type=int, help="试验周期 (ps)")
    g.add_argument("--bin-offsets-ps", help="逗号分隔的时间箱起点 (ps)")
    g.add_argument("--bin-width-ps", type=int, help="时间箱宽度 (ps)")
    g.add_argument("--run-config", help="key=value 运行配置文件, 其中的键覆盖命令行参数")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrng-cert", description=f"{settings.APP_NAME} {settings.APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    parsers = {name: sub.add_parser(name, parents=[common], help=text, description=text)
               for name, text in COMMANDS.items()}
    parsers["sweep"].add_argument("--axis", choices=["mu", "eta", "n_inputs"], default="mu", help="扫描轴")
    parsers["extract"].add_argument("--h-min", type=float, help="每次测量的最小熵, 缺省读取认证结果")
    parsers["reproduce"].add_argument("--targets", help="逗号分隔的目标名称, 缺省为全部")
    parsers["reproduce"].add_argument("--curves", action="store_true", help="同时写出完整 μ 曲线")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return {field: getattr(args, flag) for flag, field in FLAG_FIELDS.items() if getattr(args, flag, None) is not None}


def stage_kwargs(args: argparse.Namespace) -> Dict[str, Any]:
    kwargs: Dict[str, Any] = {}
    if args.command == "sweep":
        kwargs["axis"] = args.axis
    elif args.command == "extract" and args.h_min is not None:
        kwargs["h_min"] = args.h_min
    elif args.command == "reproduce":
        kwargs["curves"] = args.curves
        if args.targets:
            kwargs["targets"] = [t.strip() for t in args.targets.split(",") if t.strip()]
    return kwargs


def _fail(error: str, stage: str, kind: str) -> int:
    sys.stderr.write(json.dumps({"error": error, "stage": stage, "type": kind}, ensure_ascii=False) + "\n")
    return 1


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    register_all()

    try:
        config = RunConfig.load(args.run_config, overrides_from_args(args))
    except QrngError as e:
        return _fail(str(e), args.command, type(e).__name__)

    result = stage_registry.execute_stage(args.command, config, **stage_kwargs(args))
    sys.stdout.write(json.dumps(result.to_dict(), ensure_ascii=False, indent=2) + "\n")
    if not result.success:
        return _fail(result.error or "阶段失败", result.metadata.get("stage", args.command),
                     result.metadata.get("type", "StageFailed"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
