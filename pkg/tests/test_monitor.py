"""
能量监控测试模块
"""
import pytest

from core.exceptions import DomainError
from core.monitor import EnergyMonitor, PowerRecord, check_energy_bound, simulate_power_records


def test_all_within_bound():
    report = check_energy_bound([0.17, 0.18, 0.179], 0.18)
    assert report.passed
    assert report.record_count == 3
    assert report.offending == []
    assert report.min_margin == pytest.approx(0.0)
    assert [c.x for c in report.classes] == [0, 1, 2]


def test_violation_flags_offending_state():
    """任一记录超过 μ 即判定该输入符号超界"""
    records = [
        PowerRecord(x=0, mu_estimate=0.17),
        PowerRecord(x=1, mu_estimate=0.19),
        PowerRecord(x=1, mu_estimate=0.17),
        PowerRecord(x=2, mu_estimate=0.18),
    ]
    report = check_energy_bound(records, 0.18)
    assert not report.passed
    assert report.offending == [1]
    worst = report.classes[1]
    assert worst.count == 2
    assert worst.max_estimate == pytest.approx(0.19)
    assert worst.margin == pytest.approx(-0.01)


def test_alerts_track_worst_value():
    monitor = EnergyMonitor(0.1)
    monitor.add_record(PowerRecord(x=0, mu_estimate=0.12))
    monitor.add_record(PowerRecord(x=0, mu_estimate=0.15))
    monitor.add_record(PowerRecord(x=0, mu_estimate=0.05))
    monitor.add_record(PowerRecord(x=1, mu_estimate=0.05))
    alerts = monitor.get_active_alerts()
    assert len(alerts) == 1
    assert alerts[0].labels == {"x": "0"}
    assert float(alerts[0].annotations["value"]) == pytest.approx(0.15)
    assert len(monitor.get_records()) == 4


def test_invalid_input():
    with pytest.raises(DomainError):
        check_energy_bound([], 0.18)
    with pytest.raises(DomainError):
        EnergyMonitor(-0.1)
    with pytest.raises(DomainError):
        simulate_power_records(0, 0.1, 10)


def test_simulated_records():
    """设定值低于 μ 且噪声小时全部通过"""
    records = simulate_power_records(3, 0.17, 60, seed=2, rel_noise=0.01)
    assert len(records) == 60
    assert {r.x for r in records} == {0, 1, 2}
    assert check_energy_bound(records, 0.18).passed
    again = simulate_power_records(3, 0.17, 60, seed=2, rel_noise=0.01)
    assert [r.mu_estimate for r in again] == [r.mu_estimate for r in records]
