"""
Tests for settings, logging setup and the config models
"""

import pytest
import structlog
from pydantic import ValidationError

from src.config import Settings, configure_logging
from src.models import EnvConfig, TrainConfig


def test_settings_defaults_match_train_config():
    assert TrainConfig.from_settings(Settings()) == TrainConfig()


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("SCHEDLAB_T_MAX", "20")
    monkeypatch.setenv("SCHEDLAB_LOG_LEVEL", "DEBUG")
    settings = Settings()
    assert settings.t_max == 20
    assert settings.log_level == "DEBUG"
    assert TrainConfig.from_settings(settings, total_steps=100).t_max == 20


def test_overrides_skip_none():
    config = TrainConfig.from_settings(Settings(), layers=None, total_steps=500)
    assert config.layers is None
    assert config.total_steps == 500


@pytest.mark.parametrize(
    "kwargs",
    [{"tiles": 0, "processors": 1}, {"tiles": 2, "processors": 0}, {"tiles": 2, "processors": 2, "window": -1},
     {"tiles": 2, "processors": 2, "baseline_makespan": 0}],
)
def test_env_config_validation(kwargs):
    with pytest.raises(ValidationError):
        EnvConfig(**kwargs)


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(gamma=1.5)
    with pytest.raises(ValidationError):
        TrainConfig(t_max=0)
    with pytest.raises(ValidationError):
        TrainConfig(beta=-0.1)


@pytest.mark.parametrize("json_output", [False, True])
def test_configure_logging(capsys, json_output):
    configure_logging("WARNING", json=json_output)
    log = structlog.get_logger()
    log.info("hidden event")
    log.warning("shown event", tiles=4)
    err = capsys.readouterr().err
    assert "hidden event" not in err
    assert "shown event" in err
    configure_logging("INFO")
