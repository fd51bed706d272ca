"""Flat key=value config files.

One ``key = value`` pair per line, ``#`` starts a comment. Values stay
strings; consumers coerce with the typed getters below, which raise a
contract violation on malformed numbers so the CLI exits with code 2.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ContractViolationError

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_config(path) -> dict[str, str]:
    cfg: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractViolationError(f"config line {lineno} is not key=value: {line!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def get_int(cfg: dict, key: str, default: int) -> int:
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ContractViolationError(f"config key {key} must be an integer") from exc


def get_float(cfg: dict, key: str, default: float) -> float:
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ContractViolationError(f"config key {key} must be a number") from exc


def get_bool(cfg: dict, key: str, default: bool) -> bool:
    if key not in cfg:
        return default
    value = cfg[key].lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ContractViolationError(f"config key {key} must be a boolean, got {cfg[key]!r}")
