"""Compute-session configuration: the ``config.yml`` contract.

The document format is canonical: two-space indent under a single
``default:`` section, keys in a fixed order, string values double-quoted,
counts bare. ``render_config_yml`` always emits that exact byte sequence
for a given config, and ``parse_config_yml`` accepts reordered keys and
arbitrary surrounding whitespace while rejecting unknown keys (with a
nearest-key hint) and missing fields.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, replace

from .errors import InvalidConfig, ParseError

SIZE_RE = re.compile(r"^[0-9]+(m|g)$")

CONNECT_METHOD = "hopsworks"

# Canonical key order; also the full set of allowed keys.
_FIELD_BY_KEY = {
    "livy.url": "livy_url",
    "method": "method",
    "driverMemory": "driver_memory",
    "driverCores": "driver_cores",
    "executorMemory": "executor_memory",
    "executorCores": "executor_cores",
    "numExecutors": "num_executors",
}
_COUNT_KEYS = {"driverCores", "executorCores", "numExecutors"}


@dataclass(frozen=True)
class SparkSessionConfig:
    livy_url: str
    method: str
    driver_memory: str
    driver_cores: int
    executor_memory: str
    executor_cores: int
    num_executors: int

    def validate(self) -> None:
        if not self.livy_url or not isinstance(self.livy_url, str):
            raise InvalidConfig("livy.url must be a non-empty string")
        if not self.method or not isinstance(self.method, str):
            raise InvalidConfig("method must be a non-empty string")
        for key, value in (
            ("driverMemory", self.driver_memory),
            ("executorMemory", self.executor_memory),
        ):
            if not isinstance(value, str) or not SIZE_RE.match(value):
                raise InvalidConfig(f"{key} must match <digits>(m|g), got {value!r}")
        for key, value in (
            ("driverCores", self.driver_cores),
            ("executorCores", self.executor_cores),
            ("numExecutors", self.num_executors),
        ):
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise InvalidConfig(f"{key} must be an integer >= 1, got {value!r}")

    def with_livy_url(self, url: str) -> SparkSessionConfig:
        return replace(self, livy_url=url)

    def to_dict(self) -> dict:
        return {
            "livy.url": self.livy_url,
            "method": self.method,
            "driverMemory": self.driver_memory,
            "driverCores": self.driver_cores,
            "executorMemory": self.executor_memory,
            "executorCores": self.executor_cores,
            "numExecutors": self.num_executors,
        }

    @classmethod
    def from_dict(cls, data: dict, *, livy_url: str, method: str = CONNECT_METHOD) -> SparkSessionConfig:
        """Build from a REST-style mapping of the user-settable fields."""
        try:
            cfg = cls(
                livy_url=data.get("livy.url", livy_url),
                method=data.get("method", method),
                driver_memory=data["driverMemory"],
                driver_cores=data["driverCores"],
                executor_memory=data["executorMemory"],
                executor_cores=data["executorCores"],
                num_executors=data["numExecutors"],
            )
        except KeyError as exc:
            raise InvalidConfig(f"missing required field {exc.args[0]!r}") from None
        cfg.validate()
        return cfg


DEFAULT_DRIVER_MEMORY = "2g"
DEFAULT_DRIVER_CORES = 1
DEFAULT_EXECUTOR_MEMORY = "4g"
DEFAULT_EXECUTOR_CORES = 2
DEFAULT_NUM_EXECUTORS = 2


def default_config(livy_url: str) -> SparkSessionConfig:
    return SparkSessionConfig(
        livy_url=livy_url,
        method=CONNECT_METHOD,
        driver_memory=DEFAULT_DRIVER_MEMORY,
        driver_cores=DEFAULT_DRIVER_CORES,
        executor_memory=DEFAULT_EXECUTOR_MEMORY,
        executor_cores=DEFAULT_EXECUTOR_CORES,
        num_executors=DEFAULT_NUM_EXECUTORS,
    )


def size_to_mib(size: str) -> int:
    if not SIZE_RE.match(size or ""):
        raise InvalidConfig(f"size must match <digits>(m|g), got {size!r}")
    value, unit = int(size[:-1]), size[-1]
    return value * 1024 if unit == "g" else value


def render_config_yml(cfg: SparkSessionConfig) -> str:
    cfg.validate()
    return (
        "default:\n"
        f'  livy.url: "{cfg.livy_url}"\n'
        f'  method: "{cfg.method}"\n'
        f'  driverMemory: "{cfg.driver_memory}"\n'
        f"  driverCores: {cfg.driver_cores}\n"
        f'  executorMemory: "{cfg.executor_memory}"\n'
        f"  executorCores: {cfg.executor_cores}\n"
        f"  numExecutors: {cfg.num_executors}\n"
    )


def _suggestion(key: str) -> str:
    matches = difflib.get_close_matches(key, _FIELD_BY_KEY, n=1, cutoff=0.6)
    return f"; did you mean {matches[0]!r}?" if matches else ""


def parse_config_yml(text: str) -> SparkSessionConfig:
    """Inverse of ``render_config_yml`` on its image.

    Tolerates key reordering, blank lines, and extra whitespace. Unknown or
    duplicate keys are a ParseError carrying the offending line number;
    missing or ill-typed fields are an InvalidConfig naming the field.
    """
    values: dict[str, object] = {}
    saw_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "default:":
            if saw_header:
                raise ParseError(f"duplicate 'default:' section (line {lineno})", line=lineno)
            saw_header = True
            continue
        if ":" not in line:
            raise ParseError(f"expected 'key: value' (line {lineno}): {raw!r}", line=lineno)
        if not saw_header:
            raise ParseError(f"expected 'default:' before entries (line {lineno})", line=lineno)
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if key not in _FIELD_BY_KEY:
            raise ParseError(
                f"unknown key {key!r} (line {lineno}){_suggestion(key)}", line=lineno
            )
        if key in values:
            raise ParseError(f"duplicate key {key!r} (line {lineno})", line=lineno)
        if len(value) >= 2 and value[0] == '"' and value[-1] == '"':
            value = value[1:-1]
        if key in _COUNT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ParseError(
                    f"{key} must be an integer (line {lineno}), got {value!r}", line=lineno
                ) from None
        else:
            values[key] = value
    if not saw_header:
        raise ParseError("missing 'default:' section", line=1)
    missing = [key for key in _FIELD_BY_KEY if key not in values]
    if missing:
        raise InvalidConfig(f"missing required field {missing[0]!r}")
    cfg = SparkSessionConfig(**{_FIELD_BY_KEY[k]: v for k, v in values.items()})  # type: ignore[arg-type]
    cfg.validate()
    return cfg
