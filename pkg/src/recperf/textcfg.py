"""Plain-text ``key = value`` configuration files.

One setting per line, ``#`` starts a comment, keys are snake_case.  Byte
sizes accept binary suffixes (K/KB = 2**10, M/MB = 2**20, G/GB = 2**30).
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    """Malformed configuration file or invalid field value."""


_SIZE_SUFFIXES = {
    "k": 2**10, "kb": 2**10,
    "m": 2**20, "mb": 2**20,
    "g": 2**30, "gb": 2**30,
    "b": 1, "": 1,
}


def parse_kv_text(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse ``key = value`` lines into a dict, preserving file order."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def parse_kv_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_kv_text(text, source=str(path))


def parse_size(value: str, key: str = "size") -> int:
    """Parse a byte size like ``64M``, ``57.4 KB`` or ``1024`` into bytes."""
    text = value.strip().lower().replace(" ", "")
    split = len(text)
    while split > 0 and not text[split - 1].isdigit():
        split -= 1
    number, suffix = text[:split], text[split:]
    if suffix not in _SIZE_SUFFIXES or not number:
        raise ConfigError(f"{key}: cannot parse size {value!r}")
    try:
        scaled = float(number) * _SIZE_SUFFIXES[suffix]
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse size {value!r}") from exc
    return int(scaled)


def parse_int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc


def parse_float(value: str, key: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


def parse_int_list(value: str, key: str) -> list[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated integers, got {value!r}") from exc
