"""能量监控模块

对功率计给出的每个态的平均光子数估计逐条检查 μ 界, 超界时触发告警。
"""
from datetime import datetime
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .exceptions import DomainError
from .logger import get_logger

logger = get_logger(__name__)


class PowerRecord(BaseModel):
    """一次功率监测: 态 x 的平均光子数估计"""
    model_config = ConfigDict(frozen=True)

    x: int = Field(ge=0, description="输入符号")
    mu_estimate: float = Field(ge=0.0, description="平均光子数估计")
    timestamp: datetime = Field(default_factory=datetime.now)


class Alert(BaseModel):
    """告警信息"""
    id: str
    name: str
    description: str
    severity: str = "critical"
    status: str = "firing"
    created_at: datetime = Field(default_factory=datetime.now)
    updated_at: datetime = Field(default_factory=datetime.now)
    labels: Dict[str, str] = Field(default_factory=dict)
    annotations: Dict[str, str] = Field(default_factory=dict)


class EnergyClassReport(BaseModel):
    """单个输入符号的检查结果"""
    x: int
    count: int
    max_estimate: float
    mean_estimate: float
    margin: float = Field(description="μ - 最大估计, 为负即超界")
    passed: bool


class EnergyReport(BaseModel):
    """能量界检查报告"""
    mu: float
    passed: bool
    record_count: int
    min_margin: float
    mean_margin: float
    offending: List[int] = Field(default_factory=list)
    classes: List[EnergyClassReport] = Field(default_factory=list)


class EnergyMonitor:
    """能量监控器: 逐条接收记录, 按输入符号维护告警"""

    def __init__(self, mu: float):
        if not np.isfinite(mu) or mu < 0:
            raise DomainError(f"平均光子数必须为非负有限值: {mu}")
        self.mu = mu
        self._records: List[PowerRecord] = []
        self._alerts: Dict[str, Alert] = {}
        self._logger = get_logger(__name__)

    def add_record(self, record: PowerRecord) -> None:
        """添加一条记录并评估告警"""
        self._records.append(record)
        self._evaluate(record)

    def _evaluate(self, record: PowerRecord) -> None:
        name = f"energy_bound_x{record.x}"
        # 超界告警不会自动解除
        if record.mu_estimate > self.mu:
            self._create_or_update_alert(name, record)

    def _create_or_update_alert(self, name: str, record: PowerRecord) -> None:
        if name in self._alerts:
            alert = self._alerts[name]
            alert.updated_at = datetime.now()
            worst = max(float(alert.annotations["value"]), record.mu_estimate)
            alert.annotations["value"] = repr(worst)
            return
        alert = Alert(
            id=f"alert_{len(self._alerts) + 1}",
            name=name,
            description=f"态 {record.x} 的平均光子数超过界 μ",
            labels={"x": str(record.x)},
            annotations={"value": repr(record.mu_estimate), "threshold": repr(self.mu)},
        )
        self._alerts[name] = alert
        self._logger.warning("触发能量告警", x=record.x, estimate=record.mu_estimate, mu=self.mu)

    def get_active_alerts(self) -> List[Alert]:
        """获取活动告警"""
        return [alert for alert in self._alerts.values() if alert.status == "firing"]

    def get_records(self) -> List[PowerRecord]:
        return self._records.copy()

    def report(self) -> EnergyReport:
        """汇总每个输入符号的余量"""
        if not self._records:
            raise DomainError("没有功率记录")
        by_class: Dict[int, List[float]] = {}
        for record in self._records:
            by_class.setdefault(record.x, []).append(record.mu_estimate)

        classes = []
        for x in sorted(by_class):
            values = np.asarray(by_class[x])
            top = float(values.max())
            classes.append(
                EnergyClassReport(
                    x=x,
                    count=int(values.size),
                    max_estimate=top,
                    mean_estimate=float(values.mean()),
                    margin=self.mu - top,
                    passed=top <= self.mu,
                )
            )
        margins = np.array([self.mu - r.mu_estimate for r in self._records])
        offending = [c.x for c in classes if not c.passed]
        return EnergyReport(
            mu=self.mu,
            passed=not offending,
            record_count=len(self._records),
            min_margin=float(margins.min()),
            mean_margin=float(margins.mean()),
            offending=offending,
            classes=classes,
        )


RecordLike = Union[PowerRecord, float]


def check_energy_bound(records: Sequence[RecordLike], mu: float) -> EnergyReport:
    """每个输入符号的全部估计都不超过 μ 时通过

    records 可以是 PowerRecord, 也可以是按 x 排列的浮点估计 (第 i 个对应 x=i)。
    """
    monitor = EnergyMonitor(mu)
    for i, record in enumerate(records):
        if not isinstance(record, PowerRecord):
            record = PowerRecord(x=i, mu_estimate=float(record))
        monitor.add_record(record)
    report = monitor.report()
    if report.passed:
        logger.info("能量界检查通过", mu=mu, records=report.record_count, min_margin=report.min_margin)
    else:
        logger.warning("能量界检查失败", mu=mu, offending=report.offending, min_margin=report.min_margin)
    return report


def simulate_power_records(
    n: int,
    mu_set: float,
    count: int,
    seed: Optional[int] = None,
    rel_noise: float = 0.01,
) -> List[PowerRecord]:
    """模拟功率计读数: 各态在设定值附近有相对高斯噪声"""
    if n < 1 or count < 1:
        raise DomainError("输入数与记录数必须为正")
    if mu_set < 0 or rel_noise < 0:
        raise DomainError("设定值与噪声必须非负")
    rng = np.random.default_rng(seed)
    x = np.arange(count) % n
    values = np.clip(mu_set * (1.0 + rel_noise * rng.standard_normal(count)), 0.0, None)
    return [PowerRecord(x=int(xi), mu_estimate=float(v)) for xi, v in zip(x, values)]
