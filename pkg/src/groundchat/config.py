"""Operator configuration with strict key checking.

Values layer as defaults < config file < environment < command flags; the
last writer wins field by field.  Environment overrides use the prefix
``GROUNDCHAT_`` plus the upper-cased field name (``GROUNDCHAT_PORT=9000``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .grounding.pipeline import GroundingConfig

ENV_PREFIX = "GROUNDCHAT_"

_TRUE = frozenset({"1", "true", "yes", "on"})
_FALSE = frozenset({"0", "false", "no", "off"})


@dataclass(frozen=True)
class CliConfig:
    """Everything the command layer can be told from outside."""

    adapters: str = "demo"  # grounding adapter registry entry, "none" disables
    checkpoint: str | None = None  # model checkpoint that answers chats
    tag_score_threshold: float = 0.5
    box_score_threshold: float = 0.25
    nms_iou_threshold: float = 0.9
    mask_margin_px: float = 2.0
    seed: int = 0
    host: str = "127.0.0.1"
    port: int = 8000
    max_upload_bytes: int = 20 * 1024 * 1024
    allow_pure_text: bool = False
    sessions_path: str | None = None  # enables session persistence when set

    def grounding(self) -> GroundingConfig:
        return GroundingConfig(
            tag_score_threshold=self.tag_score_threshold,
            box_score_threshold=self.box_score_threshold,
            nms_iou_threshold=self.nms_iou_threshold,
            mask_margin_px=self.mask_margin_px,
        )


FIELD_NAMES = tuple(f.name for f in fields(CliConfig))
_TYPES: dict[str, type] = {
    "adapters": str,
    "checkpoint": str,
    "tag_score_threshold": float,
    "box_score_threshold": float,
    "nms_iou_threshold": float,
    "mask_margin_px": float,
    "seed": int,
    "host": str,
    "port": int,
    "max_upload_bytes": int,
    "allow_pure_text": bool,
    "sessions_path": str,
}
_OPTIONAL = frozenset({"checkpoint", "sessions_path"})


def _checked(name: str, value: Any) -> Any:
    """Value for one field, or ConfigError if the type is off."""
    if value is None and name in _OPTIONAL:
        return None
    want = _TYPES[name]
    # bool is an int subclass, so the order of these checks matters
    if want is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be {want.__name__}, got {value!r}")
    if want is float and isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, want):
        raise ConfigError(f"{name} must be {want.__name__}, got {value!r}")
    return value


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Strictly parsed YAML mapping of config fields."""
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return {name: _checked(name, value) for name, value in data.items()}


def parse_env_value(name: str, raw: str) -> Any:
    if raw == "" and name in _OPTIONAL:
        return None
    want = _TYPES[name]
    try:
        if want is bool:
            low = raw.strip().lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return want(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {ENV_PREFIX}{name.upper()}: {exc}") from exc


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    out: dict[str, Any] = {}
    for name in FIELD_NAMES:
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            out[name] = parse_env_value(name, raw)
    return out


def resolve_config(
    file_path: str | Path | None = None,
    environ: Mapping[str, str] | None = None,
    flags: Mapping[str, Any] | None = None,
) -> CliConfig:
    """Layered CliConfig; `flags` entries of None mean "not given"."""
    layers: dict[str, Any] = {}
    if file_path is not None:
        layers.update(read_config_file(file_path))
    layers.update(env_overrides(environ))
    for name, value in (flags or {}).items():
        if value is None:
            continue
        if name not in _TYPES:
            raise ConfigError(f"unknown config field {name!r}")
        layers[name] = _checked(name, value)
    return CliConfig(**layers)
