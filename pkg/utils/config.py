"""Runtime settings from the environment and reproducible experiment configs."""

import io
import math
import os
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, Union

from dotenv import dotenv_values

from errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_HEADER = "# latticewave config v1"

ENV_DEFAULTS = {
    'LATTICEWAVE_THREADS': '1',
    'LATTICEWAVE_BUDGET': '2e9',
    'LATTICEWAVE_RTOL': '1e-10',
    'LATTICEWAVE_OUTPUT_DIR': 'output',
    'LATTICEWAVE_LOG_DIR': 'logs',
    'LATTICEWAVE_MEMORY_FRACTION': '0.8',
}


@dataclass(frozen=True)
class RuntimeSettings:
    threads: int = 1
    budget: float = 2e9
    rtol: float = 1e-10
    output_dir: str = 'output'
    log_dir: str = 'logs'
    memory_fraction: float = 0.8

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        """Read settings from LATTICEWAVE_* variables, falling back to ENV_DEFAULTS."""
        def get(name: str) -> str:
            return os.getenv(name) or ENV_DEFAULTS[name]

        try:
            return cls(
                threads=max(1, int(get('LATTICEWAVE_THREADS'))),
                budget=float(get('LATTICEWAVE_BUDGET')),
                rtol=float(get('LATTICEWAVE_RTOL')),
                output_dir=get('LATTICEWAVE_OUTPUT_DIR'),
                log_dir=get('LATTICEWAVE_LOG_DIR'),
                memory_fraction=float(get('LATTICEWAVE_MEMORY_FRACTION')),
            )
        except ValueError as e:
            raise ConfigError(f"Invalid LATTICEWAVE_* setting: {e}") from e


def format_value(value: Any) -> str:
    """Canonical text form of a config value; parses back to the same value."""
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def _quote(text: str) -> str:
    if text == "" or any(ch in text for ch in ' \t#"\'\\='):
        escaped = text.replace('\\', '\\\\').replace('"', '\\"')
        return f'"{escaped}"'
    return text


@dataclass
class ExperimentConfig:
    """Subcommand plus its parameters in canonical string form."""

    subcommand: str
    params: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_namespace(cls, subcommand: str, namespace: Any, skip: Iterable[str] = ()) -> "ExperimentConfig":
        skip = set(skip)
        params = {
            key: format_value(value)
            for key, value in sorted(vars(namespace).items())
            if key not in skip and not callable(value)
        }
        return cls(subcommand=subcommand, params=params)

    def dumps(self) -> str:
        lines = [CONFIG_HEADER, f"subcommand={self.subcommand}"]
        lines += [f"{key}={_quote(value)}" for key, value in sorted(self.params.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        values = dotenv_values(stream=io.StringIO(text))
        subcommand = values.pop('subcommand', None)
        if not subcommand:
            raise ConfigError("Config document has no 'subcommand' entry")
        params = {key: ("" if value is None else value) for key, value in values.items()}
        return cls(subcommand=subcommand, params=dict(sorted(params.items())))

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return cls.loads(f.read())
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e

    def as_dict(self) -> Dict[str, str]:
        return {'subcommand': self.subcommand, **self.params}


def parse_fraction(text: str) -> Fraction:
    """argparse type for exact rationals such as 4/3."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"Not a rational number: {text!r}") from e


def parse_index(text: str) -> Union[Fraction, float]:
    """Lebesgue index: a rational ≥ 1 or 'inf' (returned as math.inf)."""
    if text.strip().lower() in ('inf', 'infinity'):
        return math.inf
    value = parse_fraction(text)
    if value < 1:
        raise ConfigError(f"Lebesgue index must be ≥ 1, got {text}")
    return value


def parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ('true', '1', 'yes', 'on'):
        return True
    if lowered in ('false', '0', 'no', 'off'):
        return False
    raise ConfigError(f"Not a boolean: {text!r}")


def parse_int_list(text: str) -> tuple:
    try:
        return tuple(int(part) for part in str(text).split(',') if part.strip())
    except ValueError as e:
        raise ConfigError(f"Not an integer list: {text!r}") from e


def parse_float_list(text: str) -> tuple:
    try:
        return tuple(float(part) for part in str(text).split(',') if part.strip())
    except ValueError as e:
        raise ConfigError(f"Not a number list: {text!r}") from e
