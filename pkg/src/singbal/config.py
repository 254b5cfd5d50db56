"""Line-oriented ``key = value`` experiment configuration with per-experiment schemas."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    """One schema entry. ``kind`` is int, float, str, bool, ints or floats."""

    kind: str
    default: Any
    lo: float | None = None
    hi: float | None = None
    lo_open: bool = False
    hi_open: bool = False
    choices: tuple | None = None
    optional: bool = False
    help: str = ""

    def describe(self) -> str:
        parts = [self.kind]
        if self.lo is not None or self.hi is not None:
            lb = "(" if self.lo_open else "["
            rb = ")" if self.hi_open else "]"
            lo = "-inf" if self.lo is None else f"{self.lo:g}"
            hi = "inf" if self.hi is None else f"{self.hi:g}"
            parts.append(f"in {lb}{lo}, {hi}{rb}")
        if self.choices:
            parts.append("one of " + "|".join(self.choices))
        if self.optional:
            parts.append("optional")
        return ", ".join(parts)


def _number(text: str, key: str) -> float:
    """Decimal, fraction ``a/b`` or a multiple of pi such as ``20*pi``."""
    s = text.replace(" ", "")
    scale = 1.0
    if s.endswith("pi"):
        s = s[:-2].rstrip("*") or "1"
        scale = math.pi
    try:
        return float(Fraction(s)) * scale
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _scalar(text: str, kind: str, key: str):
    if kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if kind == "float":
        return _number(text, key)
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected true/false, got {text!r}")
    return text


def _check_range(value, p: Param, key: str):
    if p.choices is not None and value not in p.choices:
        raise ConfigError(f"{key}: {value!r} is not one of {', '.join(p.choices)}")
    if isinstance(value, str):
        return
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    if p.lo is not None and (value < p.lo or (p.lo_open and value == p.lo)):
        raise ConfigError(f"{key}: {value!r} out of range ({p.describe()})")
    if p.hi is not None and (value > p.hi or (p.hi_open and value == p.hi)):
        raise ConfigError(f"{key}: {value!r} out of range ({p.describe()})")


def coerce(key: str, text: str, p: Param):
    text = text.strip()
    if p.optional and text.lower() in ("", "none", "auto"):
        return None
    if p.kind in ("ints", "floats"):
        base = "int" if p.kind == "ints" else "float"
        items = [s.strip() for s in text.split(",") if s.strip()]
        if not items:
            raise ConfigError(f"{key}: expected a comma-separated list")
        values = [_scalar(s, base, key) for s in items]
        for v in values:
            _check_range(v, p, key)
        return tuple(values)
    value = _scalar(text, p.kind, key)
    _check_range(value, p, key)
    return value


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int = 0
    output: Path = field(default_factory=lambda: Path("results"))

    def __getitem__(self, key):
        return self.params[key]

    def to_text(self) -> str:
        lines = [f"experiment = {self.experiment}", f"seed = {self.seed}", f"output = {self.output}"]
        lines += [f"{k} = {format_value(v)}" for k, v in sorted(self.params.items())]
        return "\n".join(lines) + "\n"


def _split_lines(text: str) -> list[tuple[int, str, str]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        out.append((lineno, key, value))
    return out


def parse_config(text: str, experiment: str | None = None, schemas: dict | None = None) -> ExperimentConfig:
    """Validate ``text`` against the named experiment's schema and fill defaults.

    The experiment comes from an ``experiment = name`` line or the
    ``experiment`` argument (which also covers an empty file).
    """
    if schemas is None:
        from .experiments import SCHEMAS as schemas
    entries = _split_lines(text)
    seen: dict[str, str] = {}
    for lineno, key, value in entries:
        if key in seen:
            raise ConfigError(f"{key}: given twice (line {lineno})")
        seen[key] = value
    name = seen.pop("experiment", None) or experiment
    if name is None:
        raise ConfigError("experiment: missing 'experiment = <name>' line")
    if experiment is not None and name != experiment:
        raise ConfigError(f"experiment: file names {name!r} but {experiment!r} was requested")
    if name not in schemas:
        raise ConfigError(f"experiment: unknown experiment {name!r}; known: {', '.join(sorted(schemas))}")
    schema = schemas[name]
    seed = coerce("seed", seen.pop("seed"), Param("int", 0, lo=0)) if "seed" in seen else 0
    output = Path(seen.pop("output")) if "output" in seen else Path("results") / name
    params = {}
    for key, value in seen.items():
        if key not in schema:
            raise ConfigError(f"{key}: unknown key for experiment {name!r}")
        params[key] = coerce(key, value, schema[key])
    for key, p in schema.items():
        params.setdefault(key, p.default)
    return ExperimentConfig(name, params, seed, output)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
