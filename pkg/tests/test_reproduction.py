"""
曲线复现测试模块

峰值目标需要多次求解, 标记为 slow。
"""
import pytest

from core import reproduction
from core.certification import OptimalMu
from core.detection import LossFold
from core.reproduction import (
    PEAK_TARGETS,
    ReproductionReport,
    TargetCheck,
    check_mu_trend,
    check_peak,
    convention_variants,
    reproduce,
)
from core.states import OverlapKind

TARGETS = {t.name: t for t in PEAK_TARGETS}


def test_target_names_unique():
    assert len(TARGETS) == len(PEAK_TARGETS)
    assert {"config1_lossless", "config2_lossless"} <= set(TARGETS)


def test_report_passed():
    ok = TargetCheck(name="a", description="", expected=1.0, tolerance=0.1, passed=True)
    bad = TargetCheck(name="b", description="", expected=1.0, tolerance=0.1)
    assert ReproductionReport(targets=[ok]).passed
    assert not ReproductionReport(targets=[ok, bad]).passed


def test_convention_variants():
    """各目标未达标时要比较的建模约定"""
    lossless = [c for c, _, _ in convention_variants(TARGETS["config2_lossless"])]
    assert lossless == ["epsilon=0", "overlap_model"]
    lossy = convention_variants(TARGETS["config1_lossy"])
    assert [c for c, _, _ in lossy] == ["loss_fold=linear", "epsilon=0", "overlap_model"]
    assert lossy[0][1].loss_fold is LossFold.LINEAR
    assert lossy[2][2] is OverlapKind.OVERLAP
    assert [c for c, _, _ in convention_variants(TARGETS["overlap_n3_eta08"])] == ["loss_fold=linear"]
    assert TARGETS["config2_lossless"].note


def test_missed_target_lists_variants(monkeypatch):
    """无损目标未达标时也列出其他约定, 达标的约定被标记"""
    def fake_optimal_mu(params, model, options=None, use_symmetry=False):
        h = 0.35 if model is OverlapKind.OVERLAP else 0.33
        return OptimalMu.model_construct(mu_star=0.164, h_star=h, method="grid", evaluations=[])

    monkeypatch.setattr(reproduction, "optimal_mu", fake_optimal_mu)
    check = check_peak(TARGETS["config2_lossless"])
    assert not check.passed
    assert check.note == TARGETS["config2_lossless"].note
    assert [v.convention for v in check.variants] == ["default", "epsilon=0", "overlap_model"]
    assert [v.passed for v in check.variants] == [False, False, True]


def test_passed_lossless_target_has_no_variants(monkeypatch):
    monkeypatch.setattr(
        reproduction, "optimal_mu",
        lambda params, model, options=None, use_symmetry=False: OptimalMu.model_construct(
            mu_star=0.18, h_star=0.258, method="golden", evaluations=[]),
    )
    check = check_peak(TARGETS["config1_lossless"])
    assert check.passed
    assert check.variants == []


@pytest.mark.slow
@pytest.mark.parametrize("name", ["config1_lossless", "config2_lossless"])
def test_lossless_peaks(name, options):
    """无损峰值与最优 μ"""
    check = check_peak(TARGETS[name], options)
    assert check.passed, check.model_dump()


@pytest.mark.slow
@pytest.mark.parametrize("name", ["config1_lossy", "config2_lossy"])
def test_lossy_peaks_report_variants(name, options):
    """有损目标至少记录默认损耗折算方式的结果"""
    check = check_peak(TARGETS[name], options)
    assert check.variants
    assert check.measured > 0.0
    assert check.variants[0].convention == "default"
    if not check.passed:
        conventions = [v.convention for v in check.variants]
        assert "loss_fold=linear" in conventions


@pytest.mark.slow
def test_overlap_peak_n3(options):
    check = check_peak(TARGETS["overlap_n3_eta08"], options)
    assert check.passed, check.model_dump()


@pytest.mark.slow
def test_mu_trend(options):
    """推广 Config I 的最优 μ 随输入数单调不减"""
    check = check_mu_trend([2, 3, 4], options)
    mus = [check.details[f"mu_star_n{n}"] for n in (2, 3, 4)]
    assert all(b >= a - 1e-3 for a, b in zip(mus, mus[1:]))


@pytest.mark.slow
def test_reproduce_selected_with_curve(options):
    report = reproduce(options, targets=["config1_lossless"], curves=True)
    assert [t.name for t in report.targets] == ["config1_lossless"]
    assert set(report.curves) == {"config1_lossless"}
    assert len(report.curves["config1_lossless"].points) == 25
