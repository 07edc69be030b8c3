from pathlib import Path

import pytest

from tvrecover.config import RecoveryConfig
from tvrecover.errors import InvalidInputError

ENV_VARS = ("RECOVER_OUTPUT_ROOT", "RECOVER_LOG_LEVEL", "RECOVER_DEFAULT_N", "RECOVER_SEED")


@pytest.fixture
def clean_env(monkeypatch):
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)
    return monkeypatch


def test_defaults(clean_env):
    cfg = RecoveryConfig()
    assert cfg.to_dict() == {"output_root": "runs", "log_level": "INFO", "default_n": 64, "seed": 0}


def test_environment_overrides(clean_env, tmp_path):
    clean_env.setenv("RECOVER_OUTPUT_ROOT", str(tmp_path))
    clean_env.setenv("RECOVER_LOG_LEVEL", "debug")
    clean_env.setenv("RECOVER_DEFAULT_N", "32")
    clean_env.setenv("RECOVER_SEED", "9")
    cfg = RecoveryConfig()
    assert cfg.output_root == tmp_path
    assert cfg.log_level == "DEBUG"
    assert cfg.default_n == 32
    assert cfg.seed == 9


def test_explicit_arguments_win(clean_env):
    clean_env.setenv("RECOVER_SEED", "9")
    assert RecoveryConfig(seed=3).seed == 3


@pytest.mark.parametrize("name, value", [
    ("RECOVER_LOG_LEVEL", "LOUD"),
    ("RECOVER_DEFAULT_N", "many"),
    ("RECOVER_DEFAULT_N", "1"),
    ("RECOVER_SEED", "-1"),
])
def test_invalid_environment(clean_env, name, value):
    clean_env.setenv(name, value)
    with pytest.raises(InvalidInputError, match=name):
        RecoveryConfig()


def test_resolve_output(clean_env, tmp_path):
    cfg = RecoveryConfig(output_root=tmp_path)
    assert cfg.resolve_output("exp") == tmp_path / "exp"
    assert cfg.resolve_output(Path("/abs/dir")) == Path("/abs/dir")
