"""Flat key=value run configuration files.

One assignment per line, ``#`` starts a comment, blank lines are fine.
Keys are exactly the MetaConfig field names; anything else is rejected
so a typo cannot silently fall back to a default.  Values are coerced
to the field's declared type and validated by MetaConfig itself.
"""

import dataclasses

from .meta import MetaConfig

_FIELDS = {f.name: f.type for f in dataclasses.fields(MetaConfig)}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def coerce(key: str, raw: str):
    """Parse a raw string for the given config key."""
    if key not in _FIELDS:
        raise ValueError(f"unknown config key {key!r}")
    ftype = _FIELDS[key]
    raw = raw.strip()
    try:
        if ftype is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if ftype is int:
            return int(raw)
        if ftype is float:
            return float(raw)
    except ValueError:
        raise ValueError(
            f"config key {key!r} expects {ftype.__name__}, got {raw!r}"
        ) from None
    raise ValueError(f"config key {key!r} has unsupported type {ftype}")


def parse_config_text(text: str) -> dict:
    """key=value lines -> {field name: typed value}; unknown keys raise."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        out[key] = coerce(key, raw)
    return out


def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())


def config_text(cfg: MetaConfig) -> str:
    """Render every field, parseable back via parse_config_text."""
    lines = []
    for f in dataclasses.fields(MetaConfig):
        val = getattr(cfg, f.name)
        if f.type is bool:
            val = "true" if val else "false"
        elif f.type is float:
            val = repr(float(val))
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"


def build_config(*override_maps: dict) -> MetaConfig:
    """MetaConfig from defaults, then each override map in order."""
    merged = {}
    for m in override_maps:
        merged.update(m)
    return MetaConfig(**merged)
