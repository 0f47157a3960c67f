"""Experiment configuration: nested dataclasses loaded from versioned YAML.

Unknown keys are errors. Every section has defaults, so a file only needs the
fields it changes. ``config_hash`` identifies the semantic content of a
configuration (it ignores the run name, seed list and output directory).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field, fields, is_dataclass
from importlib import resources
from pathlib import Path

import yaml

from .objectives import KINDS as OBJECTIVE_KINDS
from .planner import PlannerConfig
from .quantiles import FAMILIES, QuantileSpec
from .selection import (DEFAULT_C_SELECT, METHODS, AnnealingConfig,
                        BayesOptConfig, CrossEntropyConfig)
from .survey import BASELINES

SCHEMA_VERSION = 1
PRESETS = ("drone-small", "auv-small")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class WorldConfig:
    dims: tuple[int, ...] = (20, 15)
    resolution: int = 2
    margin: tuple[int, ...] = (0, 0)
    cell_size: float = 1.0


@dataclass(frozen=True)
class FieldConfig:
    source: str = "synthetic"
    seed: int = 0
    path: str | None = None
    units: str = ""
    # Prior used to draw synthetic fields; None reuses the survey GP's values.
    lengthscale: float | None = None
    signal_variance: float | None = None

    def __post_init__(self):
        if self.source not in ("synthetic", "raster"):
            raise ConfigError(f"field.source must be synthetic or raster, got {self.source!r}")
        if self.source == "raster" and not self.path:
            raise ConfigError("raster field needs a path")


@dataclass(frozen=True)
class SensorConfig:
    kind: str = "camera"
    footprint: tuple[int, ...] = (8, 5)
    samples: int = 5


@dataclass(frozen=True)
class GpConfig:
    lengthscale: float = 12.0
    signal_variance: float = 1.0
    noise_variance: float = 1e-4


@dataclass(frozen=True)
class QuantileConfig:
    family: str = "deciles"
    fractions: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family == "custom":
            if not self.fractions:
                raise ConfigError("custom quantile family needs fractions")
        elif self.family not in FAMILIES:
            raise ConfigError(f"unknown quantile family {self.family!r}")

    def spec(self) -> QuantileSpec:
        if self.family == "custom":
            return QuantileSpec(tuple(self.fractions))
        return QuantileSpec.family(self.family)


@dataclass(frozen=True)
class SurveyConfig:
    budget: int = 30
    seed_count: int = 100
    start: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.budget < 0:
            raise ConfigError("budget must be >= 0")
        if self.seed_count < 1:
            raise ConfigError("seed_count must be >= 1")


@dataclass(frozen=True)
class ObjectiveSection:
    # Planner objectives and/or the baselines random_walk and coverage.
    kinds: tuple[str, ...] = ("quantile_se",)
    c_plan: dict = field(default_factory=dict)
    xi: float = 0.01
    ei_denominator: str = "variance"
    subsample: float | None = None

    def __post_init__(self):
        if not self.kinds:
            raise ConfigError("at least one objective is required")
        for k in self.kinds:
            if k not in OBJECTIVE_KINDS and k not in BASELINES:
                raise ConfigError(f"unknown objective {k!r}")
        for k in self.c_plan:
            if k not in OBJECTIVE_KINDS:
                raise ConfigError(f"c_plan given for unknown objective {k!r}")


@dataclass(frozen=True)
class SelectionSection:
    methods: tuple[str, ...] = ("bv", "sa", "ce", "bo")
    c_select: float | None = None
    sa: AnnealingConfig = field(default_factory=AnnealingConfig)
    ce: CrossEntropyConfig = field(default_factory=CrossEntropyConfig)
    bo: BayesOptConfig = field(default_factory=BayesOptConfig)

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown selection method {m!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    name: str = "experiment"
    world: WorldConfig = dataclasses.field(default_factory=WorldConfig)
    field: FieldConfig = dataclasses.field(default_factory=FieldConfig)
    sensor: SensorConfig = dataclasses.field(default_factory=SensorConfig)
    gp: GpConfig = dataclasses.field(default_factory=GpConfig)
    quantiles: QuantileConfig = dataclasses.field(default_factory=QuantileConfig)
    survey: SurveyConfig = dataclasses.field(default_factory=SurveyConfig)
    objectives: ObjectiveSection = dataclasses.field(default_factory=ObjectiveSection)
    planner: PlannerConfig = dataclasses.field(default_factory=PlannerConfig)
    selection: SelectionSection = dataclasses.field(default_factory=SelectionSection)
    seeds: tuple[int, ...] = (0, 1, 2)
    output_dir: str = "runs"

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.field.source == "raster" and not Path(self.field.path).exists():
            raise ConfigError(f"raster file {self.field.path} does not exist")

    @property
    def c_select(self) -> float:
        if self.selection.c_select is not None:
            return self.selection.c_select
        return DEFAULT_C_SELECT.get(self.quantiles.family, DEFAULT_C_SELECT["deciles"])


# --- dict <-> dataclass ----------------------------------------------------

def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.init}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value, f"{where}.{name}")
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _coerce(tp, value, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or type(tp).__name__ == "UnionType":
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, where)
    if is_dataclass(tp):
        return _build(tp, value, where)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        return tuple(_coerce(args[0], v, where) for v in value)
    if tp is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if tp is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if tp in (str, bool) and isinstance(value, tp):
        return value
    if tp is dict or origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping")
        return {str(k): float(v) for k, v in value.items()}
    raise ConfigError(f"{where}: cannot use {value!r} as {getattr(tp, '__name__', tp)}")


def to_dict(obj) -> dict:
    """Plain-data view of a config, with tuples as lists."""
    def conv(v):
        if is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in fields(v) if f.init and f.compare}
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        if isinstance(v, dict):
            return {k: conv(x) for k, x in sorted(v.items())}
        return v
    return conv(obj)


def from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "config")


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    if "schema_version" not in data:
        raise ConfigError(f"{path}: missing schema_version")
    return from_dict(data)


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("quantile_ipp").joinpath("presets", f"{name}.yaml").read_text()
    return from_dict(yaml.safe_load(text))


def dump_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(to_dict(cfg), sort_keys=False))


def config_hash(cfg: ExperimentConfig) -> str:
    d = to_dict(cfg)
    for k in ("name", "seeds", "output_dir"):
        d.pop(k)
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def with_overrides(cfg: ExperimentConfig, **sections) -> ExperimentConfig:
    """Return ``cfg`` with top-level fields replaced (validated again)."""
    return dataclasses.replace(cfg, **sections)
