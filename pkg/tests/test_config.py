"""Layered configuration resolution and the run-config echo."""

import json
import os

import pytest

from nliconquer.config import (
    ENV_CONFIG,
    fiber_from,
    load_config_file,
    merged,
    resolve_config,
    set_threads,
    write_run_config,
)
from nliconquer.errors import ConfigError


def test_merged_precedence():
    defaults = {"a": 1, "b": 2, "c": 3}
    out = merged(defaults, {"b": 20}, {"c": 30, "a": None})
    assert out == {"a": 1, "b": 20, "c": 30}


def test_merged_rejects_unknown_file_keys():
    with pytest.raises(ConfigError, match="unknown config key"):
        merged({"a": 1}, {"typo": 5}, {})


def test_merged_cli_none_means_unset():
    out = merged({"a": 1}, {"a": 2}, {"a": None})
    assert out["a"] == 2


def test_load_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config_file(str(tmp_path / "missing.toml"))
    bad = tmp_path / "bad.toml"
    bad.write_text("= not toml")
    with pytest.raises(ConfigError, match="malformed"):
        load_config_file(str(bad))


def test_resolve_config_cli_beats_env(tmp_path, monkeypatch):
    env_file = tmp_path / "env.toml"
    env_file.write_text('[gen]\nn_links = 5\n')
    cli_file = tmp_path / "cli.toml"
    cli_file.write_text('[gen]\nn_links = 9\n')
    monkeypatch.setenv(ENV_CONFIG, str(env_file))
    assert resolve_config(None)["gen"]["n_links"] == 5
    assert resolve_config(str(cli_file))["gen"]["n_links"] == 9
    monkeypatch.delenv(ENV_CONFIG)
    assert resolve_config(None) == {}


def test_fiber_from_overrides_and_validates():
    fib = fiber_from({"fiber": {"alpha_db_km": 0.25}})
    assert fib.alpha_db_km == 0.25
    assert fib.gamma_per_w_km == 1.3  # untouched default
    with pytest.raises(ConfigError):
        fiber_from({"fiber": {"bogus": 1.0}})
    with pytest.raises(ConfigError):
        fiber_from({"fiber": [1, 2]})
    assert fiber_from({}).alpha_db_km == 0.2


def test_write_run_config_beside_file_and_inside_dir(tmp_path):
    target = tmp_path / "out.json"
    path = write_run_config(str(target), {"k": 1})
    assert path == str(tmp_path / "out.run_config.json")
    assert json.load(open(path)) == {"k": 1}

    d = tmp_path / "outputs"
    d.mkdir()
    path = write_run_config(str(d), {"k": 2})
    assert path == str(d / "run_config.json")
    assert json.load(open(path)) == {"k": 2}


def test_set_threads_validates(monkeypatch):
    with pytest.raises(ConfigError):
        set_threads(0)
    monkeypatch.delenv("NUMBA_NUM_THREADS", raising=False)
    set_threads(1)
    assert os.environ["NUMBA_NUM_THREADS"] == "1"
