"""
运行配置测试模块
"""
import pytest

from core.detection import ConfigKind, LossFold
from core.exceptions import FormatError
from core.runconfig import RunConfig
from core.states import OverlapKind


def test_defaults():
    config = RunConfig()
    assert config.config is ConfigKind.CONFIG_I
    assert config.model is OverlapKind.ENERGY
    assert config.loss_fold is LossFold.POISSON
    assert config.n_inputs == 3


def test_file_overrides_flags(tmp_path):
    """配置文件中的键覆盖命令行参数"""
    path = tmp_path / "run.env"
    path.write_text("mu=0.2\neta_grid=0.8, 0.9,1.0\nn_values=2,3\nconfig=II\n", encoding="utf-8")
    config = RunConfig.load(path, {"mu": 0.1, "eps": 1e-3, "seed": None})
    assert config.mu == 0.2
    assert config.eps == 1e-3
    assert config.seed is None
    assert config.eta_grid == [0.8, 0.9, 1.0]
    assert config.n_values == [2, 3]
    assert config.config is ConfigKind.CONFIG_II


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("mu=0.2\ncolour=blue\n", encoding="utf-8")
    with pytest.raises(FormatError):
        RunConfig.load(path)
    with pytest.raises(FormatError):
        RunConfig.load(overrides={"unknown": 1})


def test_invalid_values(tmp_path):
    with pytest.raises(FormatError):
        RunConfig.load(tmp_path / "missing.env")
    path = tmp_path / "run.env"
    path.write_text("mu\n", encoding="utf-8")
    with pytest.raises(FormatError):
        RunConfig.load(path)
    with pytest.raises(FormatError):
        RunConfig.load(overrides={"version": 2})
    with pytest.raises(FormatError):
        RunConfig.load(overrides={"bracket": "0.3,0.1"})
    with pytest.raises(FormatError):
        RunConfig.load(overrides={"eta": 1.5})


def test_mu_grid():
    config = RunConfig(mu_min=0.02, mu_max=0.1, mu_step=0.02)
    assert config.mu_grid() == [0.02, 0.04, 0.06, 0.08, 0.1]
    with pytest.raises(FormatError):
        RunConfig(mu_min=0.3, mu_max=0.1).mu_grid()


def test_derived_objects():
    """Config II 固定为3个输入"""
    config = RunConfig(config=ConfigKind.CONFIG_II, n_inputs=5, mu=0.164, eps=1e-4, bracket=[0.05, 0.3])
    params = config.experiment_params()
    assert params.n_inputs == 3
    assert params.n_outcomes == 7
    assert params.epsilon == 1e-4
    assert config.experiment_params(mu=0.2).mu == 0.2
    assert config.binning().n_outcomes == 7
    assert config.bracket_tuple() == (0.05, 0.3)
    options = config.solve_options()
    assert options.solver == "CLARABEL"
    assert options.solve_primal
