"""Flat ``key=value`` configuration files.

One assignment per line, ``#`` starts a comment, keys carry an optional
section prefix (``weights.kappa = 0.01``).  Values are Python literals where
they parse as such (numbers, tuples, lists, booleans) and strings otherwise.
Bare keys belong to the ``simulate`` section, so a file holding exactly the
:class:`~boussinesq_couette.solver.SimConfig` field names is a valid
simulation config.
"""

from __future__ import annotations

import ast
import dataclasses

SECTIONS = ("weights", "linear", "toy", "simulate", "diagnose")


class ConfigError(ValueError):
    pass


def parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config(text: str) -> dict:
    """``{section: {key: value}}`` from the file contents."""
    out = {s: {} for s in SECTIONS}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw!r}")
        key, val = (x.strip() for x in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        section, _, name = key.rpartition(".")
        section = section or "simulate"
        if section not in out:
            raise ConfigError(f"line {n}: unknown section {section!r}")
        out[section][name] = parse_value(val)
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def build(cls, values: dict, **overrides):
    """Instantiate a dataclass from a section, rejecting unknown keys."""
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(values) - names
    if extra:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(extra)}")
    kw = dict(values)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from exc


def dump_config(sections: dict) -> str:
    lines = []
    for sec, vals in sections.items():
        for k, v in vals.items():
            lines.append(f"{sec}.{k}={v!r}")
    return "\n".join(lines) + "\n"
