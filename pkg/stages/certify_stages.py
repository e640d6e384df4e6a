"""
认证阶段
"""
from pathlib import Path
from typing import Optional

from core.certification import (
    certify,
    check_energy_bound,
    evaluate_certificate,
    optimal_mu,
    sweep_efficiency,
    sweep_inputs,
    sweep_mu,
)
from core.engine import SolveStatus
from core.formats import (
    cert_result_to_dict,
    read_certificate,
    read_power_records,
    write_certificate,
    write_curve,
    write_json,
)
from core.reproduction import reproduce
from core.runconfig import RunConfig
from core.stages import BaseStage, StageCategory, StageMetadata, StageResult
from .common import CERT_RESULT_FILE, CERTIFICATE_FILE, resolve_table

SWEEP_AXES = ("mu", "eta", "n_inputs")


class CertifyStage(BaseStage):
    """对一张概率表认证最小熵"""

    def get_metadata(self) -> StageMetadata:
        return StageMetadata(
            name="certify",
            description="求解猜测概率上界并给出带证书的 h_min; 失败时按零熵报告",
            category=StageCategory.CERTIFY,
            parameters={
                "table": {"type": "string", "description": "概率表文件, 缺省时依次使用试验记录与模型"},
                "certificate": {"type": "string", "description": "复用的对偶证书"},
                "slack_sigma": {"type": "number", "description": "统计松弛的标准误倍数"},
                "use_symmetry": {"type": "boolean", "description": "是否尝试对称约化"},
            },
        )

    def execute(self, config: RunConfig, **kwargs) -> StageResult:
        table, source = resolve_table(config, kwargs)
        # 模型表没有统计涨落
        slack_sigma = 0.0 if source == "model" else config.slack_sigma

        certificate = read_certificate(config.certificate) if config.certificate is not None else None
        # 复用证书时认证依据的是证书中的 μ
        mu = certificate.mu if certificate is not None and certificate.mu is not None else config.mu

        power = kwargs.get("power_records")
        if power is None and config.power_file is not None:
            power = read_power_records(config.power_file)
        energy = check_energy_bound(power, mu) if power else None
        energy_checked = energy is not None
        out = self.output_dir(config)

        if energy is not None and not energy.passed:
            self._logger.error("能量界不成立, 不做认证", offending=energy.offending, mu=mu)
            return self._refuse(out, source, energy.model_dump(mode="json"), True,
                                f"输入 {energy.offending} 的平均光子数超过 μ={mu}", "EnergyBoundViolation")
        if not energy_checked:
            if config.require_energy_check:
                self._logger.error("没有功率记录, 按要求拒绝认证", mu=mu, source=source)
                return self._refuse(out, source, None, False, "没有功率记录, 无法检查能量界",
                                    "EnergyBoundUnchecked")
            self._logger.warning("没有功率记录, 未检查能量界", mu=mu, source=source)

        if certificate is not None:
            result = evaluate_certificate(table, certificate, slack_sigma)
        else:
            result = certify(table, mu, config.model, config.solve_options(), slack_sigma,
                             use_symmetry=config.use_symmetry)
        if result.certificate is not None:
            stamped = result.certificate.with_context(energy_checked=energy_checked)
            result = result.model_copy(update={"certificate": stamped, "certificate_hash": stamped.digest()})

        payload = {
            "result": cert_result_to_dict(result),
            "source": source,
            "energy": energy.model_dump(mode="json") if energy else None,
            "energy_checked": energy_checked,
        }
        write_json(out / CERT_RESULT_FILE, payload)
        files = [str(out / CERT_RESULT_FILE)]
        if result.certificate is not None:
            write_certificate(out / CERTIFICATE_FILE, result.certificate)
            files.append(str(out / CERTIFICATE_FILE))

        metadata = {"energy_checked": energy_checked}
        if not result.certified:
            metadata["type"] = "CertificationFailed"
        return StageResult(
            success=result.certified,
            output={**payload, "h_min": result.h_min, "files": files},
            error=result.error,
            metadata=metadata,
            artifacts={"result": result, "h_min": result.h_min, "table": table},
        )

    def _refuse(
        self, out: Path, source: str, energy: Optional[dict], checked: bool, error: str, kind: str
    ) -> StageResult:
        """能量前提不成立时按零熵失败"""
        payload = {"result": None, "source": source, "energy": energy, "energy_checked": checked}
        write_json(out / CERT_RESULT_FILE, payload)
        return StageResult(
            success=False,
            error=error,
            output={**payload, "h_min": 0.0},
            metadata={"type": kind, "energy_checked": checked},
            artifacts={"h_min": 0.0},
        )


class SweepStage(BaseStage):
    """μ, η 或输入数扫描"""

    def get_metadata(self) -> StageMetadata:
        return StageMetadata(
            name="sweep",
            description="按 μ 网格认证模型表, 或对每个 η / 输入数先取最优 μ",
            category=StageCategory.CERTIFY,
            parameters={
                "axis": {"type": "string", "description": "mu, eta 或 n_inputs"},
                "mu_min": {"type": "number"},
                "mu_max": {"type": "number"},
                "mu_step": {"type": "number"},
            },
        )

    def validate_params(self, config: RunConfig, **kwargs) -> Optional[str]:
        axis = kwargs.get("axis", "mu")
        if axis not in SWEEP_AXES:
            return f"未知的扫描轴: {axis}"
        return None

    def execute(self, config: RunConfig, **kwargs) -> StageResult:
        axis = kwargs.get("axis", "mu")
        params = config.experiment_params()
        options = config.solve_options()
        if axis == "mu":
            curve = sweep_mu(params, config.mu_grid(), config.model, options,
                             use_symmetry=config.use_symmetry, workers=config.workers)
        elif axis == "eta":
            curve = sweep_efficiency(params, config.eta_grid, config.model, config.bracket_tuple(), config.tol,
                                     options, use_symmetry=config.use_symmetry, workers=config.workers)
        else:
            curve = sweep_inputs(params, config.n_values, config.model, config.bracket_tuple(), config.tol,
                                 options, workers=config.workers)

        path = self.output_dir(config) / f"curve_{axis}.csv"
        write_curve(path, curve)
        peak_point, peak_h = curve.peak()
        failed = sum(1 for r in curve.results if r.status is not SolveStatus.OPTIMAL)
        return StageResult(
            success=True,
            output={"axis": axis, "points": len(curve.points), "peak": [peak_point, peak_h],
                    "non_optimal": failed, "path": str(path)},
            artifacts={"curve": curve},
        )


class OptimalMuStage(BaseStage):
    """最优 μ 搜索"""

    def get_metadata(self) -> StageMetadata:
        return StageMetadata(
            name="optimal-mu",
            description="在区间内搜索使 h_min 最大的 μ",
            category=StageCategory.CERTIFY,
            parameters={
                "bracket": {"type": "string", "description": "lo,hi"},
                "tol": {"type": "number", "description": "区间收敛容差"},
            },
        )

    def execute(self, config: RunConfig, **kwargs) -> StageResult:
        found = optimal_mu(config.experiment_params(), config.model, config.bracket_tuple(), config.tol,
                           config.solve_options(), use_symmetry=config.use_symmetry)
        payload = found.model_dump(mode="json")
        path = self.output_dir(config) / "optimal_mu.json"
        write_json(path, {"optimal_mu": payload})
        return StageResult(
            success=found.result.certified,
            output={"mu_star": found.mu_star, "h_star": found.h_star, "method": found.method, "path": str(path)},
            error=found.result.error,
            artifacts={"optimal": found},
        )


class ReproduceStage(BaseStage):
    """复现已发表的曲线数值"""

    def get_metadata(self) -> StageMetadata:
        return StageMetadata(
            name="reproduce",
            description="重新计算曲线峰值与最优 μ 趋势并与已发表数值比较",
            category=StageCategory.CERTIFY,
            parameters={
                "targets": {"type": "array", "description": "目标名称, 缺省为全部"},
                "curves": {"type": "boolean", "description": "同时写出完整 μ 曲线"},
            },
        )

    def execute(self, config: RunConfig, **kwargs) -> StageResult:
        report = reproduce(
            options=config.solve_options(),
            targets=kwargs.get("targets"),
            n_values=config.n_values,
            curves=bool(kwargs.get("curves", False)),
            workers=config.workers,
            progress=lambda check: self._logger.info("复现目标", target=check.name, passed=check.passed),
        )
        out = self.output_dir(config)
        files = [str(out / "reproduction.json")]
        write_json(out / "reproduction.json", {"reproduction": report.model_dump(mode="json")})
        for name, curve in report.curves.items():
            path = out / f"curve_{name}.csv"
            write_curve(path, curve)
            files.append(str(path))

        failed = [t.name for t in report.targets if not t.passed]
        return StageResult(
            success=report.passed,
            output={"targets": [t.model_dump(mode="json") for t in report.targets], "files": files},
            error=f"未达标的目标: {failed}" if failed else None,
            metadata={"type": "ReproductionMismatch"} if failed else {},
            artifacts={"report": report},
        )
