"""
认证模块测试
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from core.certification import (
    CertResult,
    SweepCurve,
    _is_unimodal,
    certify,
    certify_model_point,
    evaluate_certificate,
    hmin_from_pguess,
    optimal_mu,
    sweep_efficiency,
    sweep_inputs,
    sweep_mu,
)
from core.detection import ConfigKind, ExperimentParams, ProbTable, empirical_table, model_table, simulate_trials
from core.engine import SolveStatus
from core.exceptions import CertificationError, DomainError
from core.states import OverlapKind


def test_hmin_from_pguess():
    assert hmin_from_pguess(0.5) == pytest.approx(1.0)
    assert hmin_from_pguess(1.0) == 0.0
    assert hmin_from_pguess(2 ** -3) == pytest.approx(3.0)
    for bad in (0.0, -0.1, 1.5, math.nan):
        with pytest.raises(DomainError):
            hmin_from_pguess(bad)


def test_certify_config1(config1_table, options):
    """Config I 模型表: 有证书支持的正熵"""
    result = certify(config1_table, 0.18, OverlapKind.ENERGY, options, slack_sigma=0.0)
    assert result.certified
    assert result.certificate is not None
    assert result.certificate_hash == result.certificate.digest()
    assert result.certificate.mu == 0.18
    assert result.certificate.table_hash == config1_table.digest()
    assert 0.0 < result.h_min < 1.0
    assert result.h_min == pytest.approx(-math.log2(result.p_guess))
    assert result.p_guess >= config1_table.best_deterministic() - 1e-9
    assert result.delta == pytest.approx(0.64)


def test_certify_reduced_matches_full(config1_table, options):
    full = certify(config1_table, 0.18, OverlapKind.ENERGY, options, slack_sigma=0.0)
    reduced = certify(config1_table, 0.18, OverlapKind.ENERGY, options, slack_sigma=0.0, use_symmetry=True)
    assert reduced.reduced and not full.reduced
    assert reduced.h_min == pytest.approx(full.h_min, abs=1e-4)


def test_symmetry_fallback(options):
    """不对称的表退回完整问题"""
    table = ProbTable(n=2, d=3, p=np.array([[0.7, 0.2, 0.1], [0.25, 0.65, 0.1]]))
    result = certify(table, 0.2, OverlapKind.ENERGY, options, slack_sigma=0.0, use_symmetry=True)
    assert not result.reduced
    assert result.certified


def test_zero_mu_gives_zero_entropy(options):
    """μ=0 时态全同, 各行相同的表得到 h_min=0 且仍有证书"""
    table = model_table(ExperimentParams(config=ConfigKind.CONFIG_I, n_inputs=3, mu=0.0, epsilon=1e-3))
    result = certify(table, 0.0, OverlapKind.ENERGY, options, slack_sigma=0.0)
    assert result.status is SolveStatus.OPTIMAL
    assert result.h_min == 0.0
    assert result.p_guess == 1.0
    assert result.certified
    assert result.certificate is not None


def test_incompatible_data_fails_closed(options):
    """数据与态族假设不相容时按零熵报告"""
    table = ProbTable(n=2, d=2, p=np.array([[0.7, 0.3], [0.3, 0.7]]))
    result = certify(table, 0.0, OverlapKind.ENERGY, options, slack_sigma=0.0)
    assert result.status is SolveStatus.INFEASIBLE
    assert result.p_guess == 1.0
    assert result.h_min == 0.0
    assert result.error
    assert not result.certified
    assert result.certificate is None


def test_cert_result_consistency():
    with pytest.raises(ValidationError):
        CertResult(p_guess=0.5, h_min=0.3, mu=0.1, model=OverlapKind.ENERGY, delta=0.8,
                   status=SolveStatus.OPTIMAL)


def test_evaluate_certificate_reuse(options):
    """保存的证书对原表给出相同上界, 对新表给出有效但不一定最优的上界"""
    params = ExperimentParams(config=ConfigKind.CONFIG_I, n_inputs=3, mu=0.18, epsilon=1e-4)
    first = certify(model_table(params), 0.18, OverlapKind.ENERGY, options, slack_sigma=0.0)
    again = evaluate_certificate(model_table(params), first.certificate, slack_sigma=0.0)
    assert again.certified
    assert again.p_guess == pytest.approx(first.p_guess, abs=1e-9)

    noisier = model_table(params.with_updates(epsilon=1e-3))
    reused = evaluate_certificate(noisier, first.certificate, slack_sigma=0.0)
    fresh = certify(noisier, 0.18, OverlapKind.ENERGY, options, slack_sigma=0.0)
    assert reused.p_guess >= fresh.p_guess - 1e-6


def test_evaluate_reduced_certificate(config1_table, options):
    first = certify(config1_table, 0.18, OverlapKind.ENERGY, options, slack_sigma=0.0, use_symmetry=True)
    assert first.certificate.reduced
    again = evaluate_certificate(config1_table, first.certificate, slack_sigma=0.0)
    assert again.reduced
    assert again.h_min == pytest.approx(first.h_min, abs=1e-9)


def test_evaluate_requires_context(config1_table, options):
    first = certify(config1_table, 0.18, OverlapKind.ENERGY, options, slack_sigma=0.0)
    bare = first.certificate.with_context(mu=None)
    with pytest.raises(CertificationError):
        evaluate_certificate(config1_table, bare)


def test_empirical_table_uses_slack(options):
    """经验表按标准误放宽约束"""
    params = ExperimentParams(config=ConfigKind.CONFIG_I, n_inputs=3, mu=0.18, epsilon=1e-3)
    trials = simulate_trials(model_table(params), 200_000, seed=7)
    table, _ = empirical_table(trials, 3, 4)
    loose = certify(table, 0.18, OverlapKind.ENERGY, options, slack_sigma=3.0)
    assert loose.slack_used > 0.0
    assert loose.h_min >= 0.0
    exact = certify(model_table(params), 0.18, OverlapKind.ENERGY, options, slack_sigma=0.0)
    if loose.certified:
        assert loose.h_min <= exact.h_min + 0.05


def test_certify_model_point_records_errors():
    """策略数超限时记录错误而不抛出"""
    result = certify_model_point(ExperimentParams(n_inputs=8), OverlapKind.ENERGY)
    assert result.error
    assert result.h_min == 0.0
    assert not result.certified


def test_sweep_mu(options):
    params = ExperimentParams(config=ConfigKind.CONFIG_I, n_inputs=3, epsilon=1e-5)
    curve = sweep_mu(params, [0.05, 0.18, 0.4], OverlapKind.ENERGY, options, workers=1)
    assert curve.axis == "mu"
    assert len(curve.results) == 3
    assert all(r.certified for r in curve.results)
    assert curve.peak()[0] == 0.18
    assert curve.h_min[1] > curve.h_min[0]
    assert curve.h_min[1] > curve.h_min[2]


def test_sweep_grid_validation(options):
    params = ExperimentParams()
    with pytest.raises(DomainError):
        sweep_mu(params, [], OverlapKind.ENERGY, options)
    with pytest.raises(DomainError):
        sweep_mu(params, [0.2, 0.1], OverlapKind.ENERGY, options)


def test_sweep_curve_validation(config1_table, options):
    result = certify(config1_table, 0.18, OverlapKind.ENERGY, options, slack_sigma=0.0)
    with pytest.raises(ValidationError):
        SweepCurve(axis="mu", points=[0.1, 0.2], results=[result])
    with pytest.raises(ValidationError):
        SweepCurve(axis="mu", points=[0.2, 0.2], results=[result, result])


def test_is_unimodal():
    assert _is_unimodal([0.1, 0.3, 0.2])
    assert not _is_unimodal([0.3, 0.2, 0.1])
    assert not _is_unimodal([0.1, 0.3, 0.1, 0.4, 0.2])


def test_optimal_mu(options):
    """Config I, ε=1e-5 的最优 μ 接近 0.18"""
    params = ExperimentParams(config=ConfigKind.CONFIG_I, n_inputs=3, epsilon=1e-5)
    found = optimal_mu(params, OverlapKind.ENERGY, bracket=(0.05, 0.35), tol=0.01, options=options, prescan=6)
    assert found.method in ("golden", "grid")
    assert found.mu_star == pytest.approx(0.18, abs=0.03)
    assert found.h_star == pytest.approx(0.258, abs=0.01)
    assert found.result.certified
    assert found.h_star == max(h for _, h in found.evaluations)


def test_optimal_mu_invalid_bracket(options):
    with pytest.raises(DomainError):
        optimal_mu(ExperimentParams(), OverlapKind.ENERGY, bracket=(0.3, 0.1), options=options)


@pytest.mark.slow
def test_sweep_efficiency_decreases(options):
    """探测效率降低时最优熵下降"""
    params = ExperimentParams(config=ConfigKind.CONFIG_I, n_inputs=3, epsilon=1e-5)
    curve = sweep_efficiency(params, [0.8, 0.9, 1.0], OverlapKind.ENERGY, bracket=(0.05, 0.45),
                             tol=0.01, options=options, workers=1)
    assert curve.axis == "eta"
    assert curve.h_min[0] < curve.h_min[1] < curve.h_min[2]


@pytest.mark.slow
def test_sweep_inputs(options):
    params = ExperimentParams(config=ConfigKind.CONFIG_I, n_inputs=3, epsilon=1e-5)
    curve = sweep_inputs(params, [2, 3, 4], OverlapKind.ENERGY, bracket=(0.05, 0.45), tol=0.01,
                         options=options, workers=1)
    assert curve.axis == "n_inputs"
    assert all(r.certified for r in curve.results)
    assert all(r.reduced for r in curve.results)


@pytest.mark.parametrize("config", [ConfigKind.CONFIG_I, ConfigKind.CONFIG_II])
def test_energy_model_zero_entropy_above_half(config, options):
    """μ >= 0.5 时能量界给出正交态, 不认证任何随机性"""
    for mu in [0.5, 0.6, 0.8, 1.0, 1.5, 2.5]:
        params = ExperimentParams(config=config, n_inputs=3, mu=mu, epsilon=1e-4)
        result = certify_model_point(params, OverlapKind.ENERGY, options)
        assert result.delta == 0.0
        assert result.h_min == pytest.approx(0.0, abs=1e-6)
        assert result.p_guess == pytest.approx(1.0, abs=1e-6)
