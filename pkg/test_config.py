"""
설정 관리 테스트
JSON 로드, 단위 변환, 줄 번호 진단, 환경변수 재정의, 설정 해시
"""

import json

import pytest

from config import (
    CONTINUOUS, ConfigError, ConfigManager, SystemConfig, system_config_from_dict,
)
from utils import dbm_to_watts, dbw_to_watts


def _write(tmp_path, text: str) -> str:
    path = tmp_path / "config.json"
    path.write_text(text, encoding="utf-8")
    return str(path)


def _manager(tmp_path, text: str) -> ConfigManager:
    return ConfigManager(_write(tmp_path, text), env_path=str(tmp_path / ".env"))


def test_defaults_match_reference_scenario():
    config = SystemConfig()
    assert (config.num_bs, config.antennas_per_bs, config.num_users) == (4, 8, 8)
    assert (config.num_ris, config.elements_per_ris, config.phase_bits) == (3, 64, 3)
    assert config.noise_power_w == pytest.approx(1e-12)
    assert config.bs_static_w == pytest.approx(10.0)
    assert config.ris_static_w == pytest.approx(dbm_to_watts(15.0))
    assert config.outer_threshold == config.inner_threshold == 0.001
    assert config.validation_errors() == []


def test_static_power_sum():
    config = SystemConfig()
    expected = 4 * 10.0 + 192 * dbm_to_watts(15.0) + 8 * dbm_to_watts(10.0)
    assert config.static_power_w == pytest.approx(expected)


def test_continuous_phase_uses_continuous_static_power():
    config = SystemConfig(phase_bits=None)
    assert config.is_continuous
    assert config.phase_key == CONTINUOUS
    assert config.ris_static_w == pytest.approx(dbm_to_watts(25.0))


def test_load_converts_db_units(tmp_path):
    manager = _manager(tmp_path, json.dumps({
        "system": {"pt_dbm": 20, "noise_dbm": -80, "bs_static_dbw": 0, "phase_bits": 1}
    }))
    system = manager.get_config().system
    assert system.pt_w == pytest.approx(0.1)
    assert system.noise_power_w == pytest.approx(1e-11)
    assert system.bs_static_w == pytest.approx(dbw_to_watts(0.0))
    assert system.phase_bits == 1


def test_load_continuous_phase(tmp_path):
    manager = _manager(tmp_path, json.dumps({"system": {"phase_bits": "continuous"}}))
    assert manager.get_config().system.phase_bits is None


def test_unknown_key_reports_line(tmp_path):
    text = '{\n  "system": {\n    "num_bs": 4,\n    "pt_watts": 1\n  }\n}\n'
    with pytest.raises(ConfigError) as excinfo:
        _manager(tmp_path, text)
    assert excinfo.value.line == 4
    assert str(excinfo.value).startswith("line 4:")


def test_malformed_json_reports_line(tmp_path):
    text = '{\n  "system": {\n    "num_bs": 4,\n  }\n}\n'
    with pytest.raises(ConfigError) as excinfo:
        _manager(tmp_path, text)
    assert excinfo.value.line is not None


def test_invalid_value_reports_line(tmp_path):
    text = '{\n  "system": {\n    "num_users": 99\n  }\n}\n'
    with pytest.raises(ConfigError) as excinfo:
        _manager(tmp_path, text)
    assert excinfo.value.line == 3


def test_invalid_phase_bits_rejected():
    config = SystemConfig(phase_bits=4)
    with pytest.raises(ConfigError):
        config.validate()


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        ConfigManager(str(tmp_path / "missing.json"), env_path=str(tmp_path / ".env"))


def test_solver_section(tmp_path):
    manager = _manager(tmp_path, json.dumps({"solver": {"max_passes": 5, "analog_method": "closed_form"}}))
    solver = manager.get_config().system.solver
    assert solver.max_passes == 5
    assert solver.analog_method == "closed_form"


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("EEM_THREADS", "3")
    monkeypatch.setenv("EEM_LOG_LEVEL", "debug")
    manager = ConfigManager(None, env_path=str(tmp_path / ".env"))
    assert manager.get_config().harness.threads == 3
    assert manager.get_config().logging.level == "DEBUG"


def test_save_and_reload_round_trip(tmp_path):
    manager = ConfigManager(None, env_path=str(tmp_path / ".env"))
    manager.update_system(num_users=4, pt_w=dbm_to_watts(20.0))
    path = str(tmp_path / "saved.json")
    manager.save_config(path)

    reloaded = ConfigManager(path, env_path=str(tmp_path / ".env")).get_config().system
    assert reloaded.num_users == 4
    assert reloaded.pt_w == pytest.approx(0.1)
    assert reloaded.config_hash() == manager.get_config().system.config_hash()


def test_config_hash_independent_of_key_order():
    a = system_config_from_dict({"num_bs": 2, "pt_dbm": 25})
    b = system_config_from_dict({"pt_dbm": 25, "num_bs": 2})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != SystemConfig().config_hash()


def test_with_updates_copies_solver():
    base = SystemConfig()
    copy = base.with_updates(num_ris=0)
    copy.solver.max_passes = 1
    assert base.solver.max_passes == 20
    assert copy.num_ris == 0 and base.num_ris == 3


def test_validate_config_reports_errors(tmp_path):
    manager = ConfigManager(None, env_path=str(tmp_path / ".env"))
    assert manager.validate_config()
    manager.config.harness.threads = 0
    assert not manager.validate_config()
