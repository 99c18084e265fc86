"""Configuration loading and environment variable parsing for condyr."""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any, Dict, Optional

try:
    import yaml  # type: ignore
except ImportError as exc:  # pragma: no cover
    raise SystemExit("PyYAML is required but not installed") from exc

from condyr.constants import DEFAULT_CONFIG_PATH, OUTPUT_FORMATS, PG_URL_ENV, TRUTHY
from condyr.exceptions import ConfigError
from condyr.models import Config
from condyr.utils import get_env, get_env_bool, log, parse_int, parse_int_env

# YAML key -> Config field
_FILE_KEYS = {
    "store": "store_path",
    "metadata_graph": "metadata_graph",
    "inline_ids": "inline_ids",
    "format": "output_format",
    "sort": "stable_sort",
    "repetitions": "repetitions",
    "warmup": "warmup",
    "allow_empty_snapshot": "allow_empty_snapshot",
    "selftest_rounds": "selftest_rounds",
    "pg_url": "pg_url",
}


def load_config_file(config_path: Path) -> Dict[str, Any]:
    if not config_path.exists():
        raise ConfigError(f"Config file missing: {config_path}")
    try:
        data = yaml.safe_load(config_path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{config_path} contains invalid YAML: {exc}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{config_path} must contain a YAML mapping, got {type(data).__name__}")
    unknown = sorted(set(data) - set(_FILE_KEYS))
    if unknown:
        raise ConfigError(f"Unknown config keys in {config_path}: {', '.join(unknown)}")
    return data


def _coerce(field: str, raw: Any) -> Any:
    if field == "store_path":
        return Path(str(raw))
    if field in ("inline_ids", "stable_sort", "allow_empty_snapshot"):
        if isinstance(raw, bool):
            return raw
        return str(raw).lower() in TRUTHY
    if field == "repetitions":
        return parse_int("repetitions", raw, min_val=1)
    if field in ("warmup", "selftest_rounds"):
        return parse_int(field, raw, min_val=0)
    if field == "output_format":
        value = str(raw).strip().lower()
        if value not in OUTPUT_FORMATS:
            raise ConfigError(f"Invalid format '{raw}'. Supported: {', '.join(sorted(OUTPUT_FORMATS))}")
        return value
    if raw is None:
        return None
    return str(raw)


def apply_overrides(cfg: Config, **overrides: Any) -> Config:
    """Return ``cfg`` with every non-None override applied and validated."""
    changes = {name: _coerce(name, value) for name, value in overrides.items() if value is not None}
    return dataclasses.replace(cfg, **changes)


def parse_env(cfg: Config) -> Config:
    overrides: Dict[str, Any] = {
        "store_path": get_env("CONDYR_STORE"),
        "metadata_graph": get_env("CONDYR_METADATA_GRAPH"),
        "output_format": get_env("CONDYR_FORMAT"),
        "pg_url": get_env(PG_URL_ENV),
    }
    if get_env("CONDYR_INLINE_IDS") is not None:
        overrides["inline_ids"] = get_env_bool("CONDYR_INLINE_IDS")
    if get_env("CONDYR_SORT") is not None:
        overrides["stable_sort"] = get_env_bool("CONDYR_SORT")
    if get_env("CONDYR_ALLOW_EMPTY") is not None:
        overrides["allow_empty_snapshot"] = get_env_bool("CONDYR_ALLOW_EMPTY")
    if get_env("CONDYR_REPS") is not None:
        overrides["repetitions"] = parse_int_env("CONDYR_REPS", str(cfg.repetitions))
    if get_env("CONDYR_WARMUP") is not None:
        overrides["warmup"] = parse_int_env("CONDYR_WARMUP", str(cfg.warmup), min_val=0)
    if get_env("CONDYR_SELFTEST_ROUNDS") is not None:
        overrides["selftest_rounds"] = parse_int_env("CONDYR_SELFTEST_ROUNDS", str(cfg.selftest_rounds), min_val=0)
    return apply_overrides(cfg, **overrides)


def load_config(config_path: Optional[Path] = None) -> Config:
    """Resolve defaults, then the YAML file, then the environment."""
    cfg = Config()
    if config_path is None:
        env_path = get_env("CONDYR_CONFIG")
        if env_path:
            config_path = Path(env_path)
        elif DEFAULT_CONFIG_PATH.exists():
            config_path = DEFAULT_CONFIG_PATH
    if config_path is not None:
        data = load_config_file(config_path)
        cfg = apply_overrides(cfg, **{_FILE_KEYS[key]: value for key, value in data.items()})
        log("DEBUG", f"Loaded configuration from {config_path}")
    return parse_env(cfg)
