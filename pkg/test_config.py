"""
Тесты настроек ROSEN_*
"""

import pytest
from pydantic import ValidationError

from config import Settings


def test_env_prefix(monkeypatch):
    monkeypatch.setenv("ROSEN_PRECISION", "256")
    monkeypatch.setenv("ROSEN_SHARDS", "3")
    current = Settings(_env_file=None)
    assert current.precision == 256
    assert current.shards == 3


def test_unprefixed_and_unknown_variables_ignored(monkeypatch):
    monkeypatch.delenv("ROSEN_PRECISION", raising=False)
    monkeypatch.setenv("PRECISION", "512")
    monkeypatch.setenv("ROSEN_UNKNOWN_OPTION", "1")
    assert Settings(_env_file=None).precision == 128


def test_env_file(tmp_path, monkeypatch):
    monkeypatch.delenv("ROSEN_SEED", raising=False)
    env = tmp_path / ".env"
    env.write_text("ROSEN_SEED=7\nROSEN_LOG_LEVEL=DEBUG\nOTHER=1\n", encoding="utf-8")
    current = Settings(_env_file=env)
    assert current.seed == 7
    assert current.log_level == "DEBUG"


def test_precision_lower_bound(monkeypatch):
    monkeypatch.setenv("ROSEN_PRECISION", "32")
    with pytest.raises(ValidationError):
        Settings(_env_file=None)
