"""Reader for the flat ``key = value`` config files used by the CLI.

Lane geometry, field parameters, column remapping and MPC settings all
share this format. Lines starting with ``#`` or ``;`` are comments.
"""
from __future__ import annotations

import configparser
from pathlib import Path
from typing import Union

from .errors import ConfigError

_SECTION = "cautraj"


def parse_kv(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
        interpolation=None,
    )
    parser.optionxform = str  # keep key case (column names are case sensitive)
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return dict(parser[_SECTION])


def read_kv(path: Union[str, Path]) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_kv(text)


def as_float(cfg: dict[str, str], key: str, default: float) -> float:
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {cfg[key]!r}") from exc


def as_int(cfg: dict[str, str], key: str, default: int) -> int:
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {cfg[key]!r}") from exc


def as_float_list(cfg: dict[str, str], key: str) -> list[float]:
    try:
        return [float(v) for v in cfg[key].split(",") if v.strip()]
    except KeyError as exc:
        raise ConfigError(f"missing key {key!r}") from exc
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated numbers") from exc
