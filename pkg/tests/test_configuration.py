import pytest

from dcopt.configuration import Configuration
from dcopt.dataclasses import ALConfig, PenaltyConfig, SCAConfig
from dcopt.enums import Command, Method
from dcopt.errors import ConfigurationError


def test_defaults():
    config = Configuration(use_env=False)
    assert config.command == Command.SOLVE
    assert config.method == Method.PM2
    assert config.run.threads == 1
    assert not config.aux.enabled
    assert not config.verify.enabled

    cfg = config.solver_config()
    assert isinstance(cfg, PenaltyConfig)
    assert not isinstance(cfg, ALConfig)
    assert cfg.p == 2
    assert cfg.eta(0) == pytest.approx(1e-3)
    assert cfg.eta(20) == 1e-10
    assert cfg.sca_config(1).eps == cfg.eps
    assert cfg.sca_config(1).eta == pytest.approx(1e-4)


def test_alm_config():
    config = Configuration(overrides={'method': 'alm', 'aux': {'enabled': True}, 'solver': {'lambda0': [0.5]}},
                           use_env=False)
    cfg = config.solver_config()
    assert isinstance(cfg, ALConfig)
    assert cfg.alpha == pytest.approx(1.05)
    assert cfg.lambda0 == [0.5]
    assert cfg.aux.enabled
    assert cfg.gamma(2.0) == pytest.approx(5.0)


def test_pm1_config():
    cfg = Configuration(overrides={'method': 'pm1'}, use_env=False).solver_config()
    assert cfg.p == 1

    with pytest.raises(ConfigurationError) as e:
        Configuration(overrides={'method': 'pm1', 'solver': {'p': 2}}, use_env=False)

    assert e.value.path == 'solver.p'


@pytest.mark.parametrize('overrides', [
    {'solver': {'sigma': 1.0}},
    {'solver': {'eta_decay': 0.0}},
    {'sca': {'backend': 'newton'}},
    {'solver': {'unknown': 1}},
    {'problem': {'n': 0}},
    {'method': 'pm3'},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigurationError):
        Configuration(overrides=overrides, use_env=False)


def test_rho_cap_below_rho0():
    with pytest.raises(ConfigurationError) as e:
        Configuration(overrides={'solver': {'rho0': 10.0, 'rho_cap': 1.0}}, use_env=False)

    assert e.value.path == 'solver.rho_cap'


def test_from_file(tmp_path):
    path = tmp_path / 'config.yml'
    path.write_text('method: alm\nsolver:\n  rho0: 0.5\nsca:\n  workers: 2\n', encoding='utf-8')
    config = Configuration.from_file(str(path), overrides={'seed': 3}, use_env=False)
    assert config.method == Method.ALM
    assert config.run.seed == 3
    cfg = config.solver_config()
    assert cfg.rho0 == 0.5
    assert cfg.sca.workers == 2
    assert cfg.sigma == 2.0


def test_from_file_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        Configuration.from_file(str(tmp_path / 'missing.yml'), use_env=False)

    path = tmp_path / 'list.yml'
    path.write_text('- a\n- b\n', encoding='utf-8')
    with pytest.raises(ConfigurationError):
        Configuration.from_file(str(path), use_env=False)

    assert Configuration.from_file(None, use_env=False) == Configuration(use_env=False)


def test_environment(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv('DCOPT_THREADS', '4')
    monkeypatch.setenv('DCOPT_LOG_LEVEL', 'debug')
    config = Configuration()
    assert config.run.threads == 4
    assert config.run.log_level == 'DEBUG'

    assert Configuration(overrides={'threads': 2}).run.threads == 2

    monkeypatch.setenv('DCOPT_THREADS', 'many')
    with pytest.raises(ConfigurationError):
        Configuration()


def test_equality():
    first = Configuration(overrides={'seed': 1}, use_env=False)
    assert first == Configuration(overrides={'seed': 1}, use_env=False)
    assert first != Configuration(overrides={'seed': 2}, use_env=False)
    assert first.run == Configuration(source_dict=first.as_dict(), use_env=False).run
    assert 'seed: 1' in first.dump()


def test_delta_schedule():
    cfg = SCAConfig(delta0=0.1, delta_decay=0.1, delta_floor=1e-8, eta=1e-3)
    assert cfg.delta(0) == pytest.approx(0.1)
    assert cfg.delta(2) == pytest.approx(1e-3)
    assert cfg.delta(20) == 1e-8
    # capped so that delta^2/(2 L0) stays below eta/2
    assert cfg.delta(0, L0=1.0) == pytest.approx(1e-3 ** 0.5)
    assert cfg.delta(3, L0=1.0) == pytest.approx(1e-4)
