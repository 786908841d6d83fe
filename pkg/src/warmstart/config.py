"""Run configuration: `key = value` files, flag precedence, provenance.

Config files are line-oriented UTF-8: one `key = value` per line, full-line
`#` comments, blank lines ignored. Command-line flags always win over config
values, which win over built-in defaults. Every run appends a provenance
record to a run log so artifacts can be traced to their inputs.
"""

from __future__ import annotations

import hashlib
import os
import sys
import time
from typing import Callable, Optional

from .errors import WarmstartError

RUN_LOG_ENV = "WARMSTART_RUN_LOG"
SEED_ENV = "WARMSTART_SEED"
DEFAULT_RUN_LOG = "warmstart-runs.log"


class ConfigError(WarmstartError):
    pass


def parse_config_file(path) -> dict[str, str]:
    """Read `key = value` lines; values keep internal whitespace."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value
    return out


def parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def resolve(
    flag_value,
    config: dict[str, str],
    key: str,
    default,
    convert: Optional[Callable[[str], object]] = None,
):
    """Flag over config over default. Flags are pre-parsed by argparse;
    config values are strings and go through `convert`."""
    if flag_value is not None:
        return flag_value
    if key in config:
        raw = config[key]
        if convert is None:
            return raw
        try:
            return convert(raw)
        except ConfigError:
            raise
        except Exception as e:
            raise ConfigError(f"config key {key}: cannot parse {raw!r}: {e}") from e
    return default


def resolve_seed(flag_value: Optional[int], config: dict[str, str]) -> int:
    """Seed precedence: flag, config, WARMSTART_SEED env var, 0."""
    if flag_value is not None:
        return flag_value
    if "seed" in config:
        try:
            return int(config["seed"])
        except ValueError as e:
            raise ConfigError(f"config key seed: {config['seed']!r} is not an integer") from e
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from e
    return 0


def config_hash(values: dict[str, object]) -> str:
    """Order-independent digest of the effective configuration."""
    lines = [f"{k}={values[k]}" for k in sorted(values)]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()[:16]


def append_run_log(subcommand: str, values: dict[str, object], seed: int, path=None) -> None:
    """One provenance record per run: when, what, which config, which seed.

    Logging failures never fail the run; the log is best-effort bookkeeping.
    """
    if path is None:
        path = os.environ.get(RUN_LOG_ENV, DEFAULT_RUN_LOG)
    from . import __version__

    record = "\t".join(
        [
            time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            subcommand,
            f"config={config_hash(values)}",
            f"seed={seed}",
            f"warmstart={__version__}",
            f"python={sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}",
        ]
    )
    try:
        with open(path, "a", encoding="utf-8") as f:
            f.write(record + "\n")
    except OSError:
        pass
