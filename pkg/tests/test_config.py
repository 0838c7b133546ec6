import pytest

from configs.config import Config, merge_settings
from src.core.error_handler import InvalidArgumentError
from src.utils.config import RunConfig, load_config


@pytest.fixture
def clean_env(monkeypatch):
    for name in ("BAGCHI_SEED", "BAGCHI_CACHE_DIR", "BAGCHI_THREADS", "LOG_LEVEL", "LOG_FILE"):
        monkeypatch.delenv(name, raising=False)
    return monkeypatch


def test_defaults_from_settings(clean_env):
    config = Config()
    assert config.SEED == 20240601
    assert config.THREADS == 4
    assert config.CACHE_DIR == "cache"
    assert config.LOG_LEVEL == "INFO"
    assert config.section("grid") == {"center": 0.75, "radius": 0.2, "K": 64}
    assert config.section("missing") == {}


def test_accuracy_defaults(clean_env):
    config = Config()
    assert config.section("petersson")["c_factor"] == 10000
    N = config.section("reflection")["N"]
    assert N == 1 << 16
    assert config.section("family")["nmax"] >= 2 * N


def test_user_yaml_overrides_nested_keys(clean_env, tmp_path):
    user = tmp_path / "user.yaml"
    user.write_text("run:\n  seed: 7\ngrid:\n  K: 16\n")
    settings = load_config(str(user))
    assert settings["run"]["seed"] == 7
    assert settings["run"]["threads"] == 4
    assert settings["grid"] == {"center": 0.75, "radius": 0.2, "K": 16}


def test_environment_wins_over_files(clean_env, tmp_path):
    user = tmp_path / "user.yaml"
    user.write_text("run:\n  seed: 7\n")
    clean_env.setenv("BAGCHI_SEED", "0x10")
    clean_env.setenv("BAGCHI_THREADS", "2")
    clean_env.setenv("BAGCHI_CACHE_DIR", str(tmp_path / "c"))
    clean_env.setenv("LOG_LEVEL", "DEBUG")
    config = Config(user_path=user)
    assert config.SEED == 16
    assert config.THREADS == 2
    assert config.CACHE_DIR == str(tmp_path / "c")
    assert config.LOG_LEVEL == "DEBUG"
    assert config.settings["run"]["seed"] == 16


def test_merge_does_not_mutate_base():
    base = {"a": {"b": 1, "c": 2}}
    merged = merge_settings(base, {"a": {"b": 3}})
    assert merged == {"a": {"b": 3, "c": 2}}
    assert base == {"a": {"b": 1, "c": 2}}
    assert merge_settings(base, None) == base


def test_run_config_masks_seed():
    config = RunConfig(command="model ensemble", seed=(1 << 64) + 5)
    assert config.seed == 5


@pytest.mark.parametrize("field", ["nmax", "N", "M", "threads"])
def test_run_config_rejects_non_positive(field):
    with pytest.raises(ValueError):
        RunConfig(command="x", **{field: 0})


def test_run_config_rejects_negative_eps():
    with pytest.raises(ValueError):
        RunConfig(command="x", eps=[0.1, -0.1])


def test_run_config_rejects_unknown_fields():
    with pytest.raises(ValueError):
        RunConfig(command="x", colour="blue")


def test_run_config_rejects_bad_grid():
    with pytest.raises(InvalidArgumentError):
        RunConfig(command="x", grid="0.75,0.1")


def test_run_config_dump_is_json_ready():
    config = RunConfig(command="family compute", seed=3, levels=[11], nmax=1000, grid="0.75,0.1,16")
    dumped = config.model_dump()
    assert dumped["levels"] == [11]
    assert dumped["grid"] == "0.75,0.1,16"
    assert dumped["extra"] == {}
