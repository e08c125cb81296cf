"""Pipeline configuration: nested dataclasses loaded from YAML/JSON with strict keys."""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .diffusion import TrainConfig
from .partition import DEFAULT_HORIZON_WINDOWS
from .tsg_metrics import MetricConfig

MODES = ("held-out", "full-data", "leave-target-out")


class ConfigError(ValueError):
    pass


@dataclass
class SourceConfig:
    kind: str = "surrogate"  # "surrogate" | "pronostia"
    path: str | None = None
    preset: str | None = "benchmark"
    runs: list[dict] | None = None  # explicit SurrogateSpec field dicts


@dataclass
class PartitionSettings:
    k: int = 3
    gamma: float = 0.3
    o: int | None = None  # raw steps; None means 8 windows
    complete_run_ids: list[int] = field(default_factory=lambda: [0, 2, 4])
    targets: list[int] | None = None  # default: every incomplete run


@dataclass
class DenoiserSettings:
    h: int = 32
    R: int = 6
    e: int = 64
    dilations: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16, 32])


@dataclass
class PdmSettings:
    epochs: int = 500
    lr: float = 0.5
    l2: float = 1e-3
    class_weighting: str = "inverse-frequency"


@dataclass
class PipelineConfig:
    source: SourceConfig = field(default_factory=SourceConfig)
    window_length: int = 2560
    normalization: str = "global-standardize"
    partition: PartitionSettings = field(default_factory=PartitionSettings)
    denoiser: DenoiserSettings = field(default_factory=DenoiserSettings)
    train: TrainConfig = field(default_factory=TrainConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    pdm: PdmSettings = field(default_factory=PdmSettings)
    seeds: list[int] = field(default_factory=lambda: [0])
    mode: str = "held-out"
    evaluate_held_out: bool = True
    out: str = "runs/default"

    @property
    def horizon(self) -> int:
        return self.partition.o if self.partition.o is not None else DEFAULT_HORIZON_WINDOWS * self.window_length

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "PipelineConfig":
        s = self.source
        if s.kind not in ("surrogate", "pronostia"):
            raise ConfigError(f"source.kind must be surrogate or pronostia, got {s.kind!r}")
        if s.kind == "pronostia":
            if not s.path:
                raise ConfigError("source.path is required for pronostia data")
            if not Path(s.path).is_dir():
                raise ConfigError(f"source.path does not exist: {s.path}")
        elif s.runs is None and s.preset not in ("benchmark", "tiny"):
            raise ConfigError(f"unknown surrogate preset {s.preset!r}")
        if self.window_length <= 0:
            raise ConfigError("window_length must be positive")
        if self.normalization not in ("global-minmax", "global-standardize"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        p = self.partition
        if not 0.0 < p.gamma < 1.0:
            raise ConfigError("partition.gamma must lie in (0, 1); gamma = 0 leaves a bearing without healthy data in A")
        if len(p.complete_run_ids) != p.k:
            raise ConfigError(f"partition.k={p.k} but {len(p.complete_run_ids)} complete_run_ids")
        if p.o is not None and p.o < 0:
            raise ConfigError("partition.o must be non-negative")
        if min(self.denoiser.h, self.denoiser.R, self.denoiser.e) <= 0 or self.denoiser.e % 2:
            raise ConfigError("denoiser sizes must be positive and e even")
        try:
            self.train.validate()
        except ValueError as exc:
            raise ConfigError(f"train: {exc}") from None
        if self.pdm.class_weighting not in ("none", "inverse-frequency"):
            raise ConfigError("pdm.class_weighting must be none or inverse-frequency")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        return self


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        hint = hints[k]
        if dataclasses.is_dataclass(hint):
            kwargs[k] = _build(hint, v, f"{where}.{k}")
        elif hint is tuple or typing.get_origin(hint) is tuple:
            kwargs[k] = tuple(v)
        else:
            kwargs[k] = v
    return cls(**kwargs)


def config_from_dict(data: dict) -> PipelineConfig:
    return _build(PipelineConfig, data or {}, "config")


def load_config(path) -> PipelineConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data or {})
