"""Layered run configuration: defaults, TOML file, environment, CLI flags.

Precedence, lowest to highest: built-in defaults, the config file named by
NLICONQUER_CONFIG, the file named by --config, individual CLI flags. Every
command echoes its fully resolved configuration next to its outputs.
"""

from __future__ import annotations

import json
import os

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .errors import ConfigError
from .phys import FiberParams

ENV_CONFIG = "NLICONQUER_CONFIG"


def load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"malformed config file {path}: {e}")


def resolve_config(cli_path: str | None) -> dict:
    """Config dict from --config, else the environment, else empty."""
    path = cli_path or os.environ.get(ENV_CONFIG)
    if not path:
        return {}
    return load_config_file(path)


def fiber_from(cfg: dict) -> FiberParams:
    raw = cfg.get("fiber", {})
    if not isinstance(raw, dict):
        raise ConfigError("[fiber] section must be a table")
    return FiberParams.from_dict(raw)


def merged(defaults: dict, file_section: dict, cli: dict) -> dict:
    """Overlay a config-file section and CLI values onto defaults.

    File keys outside the defaults are rejected to catch typos; CLI values
    of None mean the flag was not given.
    """
    bad = set(file_section) - set(defaults)
    if bad:
        raise ConfigError(f"unknown config key(s): {sorted(bad)}")
    out = dict(defaults)
    out.update(file_section)
    out.update({k: v for k, v in cli.items() if v is not None})
    return out


def write_run_config(out_path: str, payload: dict) -> str:
    """Write the resolved-config echo next to an output file or directory."""
    if os.path.isdir(out_path):
        path = os.path.join(out_path, "run_config.json")
    else:
        base, _ext = os.path.splitext(out_path)
        path = base + ".run_config.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def set_threads(n: int) -> None:
    """Pin the compiled backend's thread count.

    No kernel uses parallel execution, so results are identical for any
    value; this only caps what the runtime may spawn. Requests above the
    runtime's launch-time maximum are clamped to it.
    """
    if n < 1:
        raise ConfigError("threads must be >= 1")
    os.environ.setdefault("NUMBA_NUM_THREADS", str(n))
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass
