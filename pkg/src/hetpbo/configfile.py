"""Flat key/value experiment config files with dotted section prefixes.

Format: one `section.key = value` per line, '#' comments, lists comma
separated. Every field of the experiment config is addressable.
"""

from __future__ import annotations

from pathlib import Path

__all__ = ["parse_config_text", "load_config_file", "format_config"]


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config_file(path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())


def format_config(mapping: dict[str, object]) -> str:
    lines = []
    for key in sorted(mapping):
        value = mapping[key]
        if isinstance(value, (list, tuple)):
            value = ", ".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def get_float(cfg: dict[str, str], key: str, default=None) -> float | None:
    if key not in cfg:
        return default
    return float(cfg[key])


def get_int(cfg: dict[str, str], key: str, default=None) -> int | None:
    if key not in cfg:
        return default
    return int(cfg[key])


def get_str(cfg: dict[str, str], key: str, default=None) -> str | None:
    return cfg.get(key, default)


def get_floats(cfg: dict[str, str], key: str, default=None):
    if key not in cfg:
        return default
    raw = cfg[key].replace(",", " ").split()
    return [float(v) for v in raw]


def get_ints(cfg: dict[str, str], key: str, default=None):
    if key not in cfg:
        return default
    raw = cfg[key].replace(",", " ").split()
    return [int(v) for v in raw]
