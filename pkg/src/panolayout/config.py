"""Pipeline configuration stored as TOML with one table per stage."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping

import tomli
import tomli_w

from .attention import AttentionParams
from .evaluation import LossWeights
from .labeling import CrfParams
from .layout_recon import ReconParams
from .transforms import AugmentPolicy


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class UnaryConfig:
    confidence: float = 0.75


@dataclass(frozen=True)
class BoundaryConfig:
    median_window: int = 5
    mad_threshold: float = 3.5
    mad_min_valid: int = 8


@dataclass(frozen=True)
class ReconConfig:
    k: int = 3
    w: int = 3
    exact: bool = False
    min_valid_fraction: float = 0.25

    def params(self) -> ReconParams:
        return ReconParams(self.k, self.w)


@dataclass(frozen=True)
class LossConfig:
    lambda_l1: tuple = (0.15, 0.1, 0.05)
    lambda_v: tuple = (0.1, 0.1, 0.05)
    lambda_s: tuple = (0.1, 0.1, 0.05)
    lambda_layout: float = 0.05
    log_alpha: float = 0.5
    vn_sample_ratio: float = 0.15

    def weights(self) -> LossWeights:
        return LossWeights(tuple(self.lambda_l1), tuple(self.lambda_v), tuple(self.lambda_s), self.lambda_layout)


@dataclass(frozen=True)
class MetricsConfig:
    min_depth: float = 0.0
    max_depth: float = math.inf


@dataclass(frozen=True)
class SynthConfig:
    x_min: float = -2.0
    x_max: float = 2.0
    z_min: float = -2.0
    z_max: float = 2.0
    y_floor: float = -1.3
    y_ceil: float = 1.3
    width: int = 512
    height: int = 256
    hole_fraction: float = 0.0


@dataclass(frozen=True)
class IOConfig:
    out: str = ""


def _default_mapping() -> Dict[str, int]:
    return {"0": 0, "1": 1, "2": 2, "3": 3}


@dataclass(frozen=True)
class PipelineConfig:
    unary: UnaryConfig = field(default_factory=UnaryConfig)
    crf: CrfParams = field(default_factory=CrfParams)
    boundary: BoundaryConfig = field(default_factory=BoundaryConfig)
    recon: ReconConfig = field(default_factory=ReconConfig)
    attention: AttentionParams = field(default_factory=AttentionParams)
    loss: LossConfig = field(default_factory=LossConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    augment: AugmentPolicy = field(default_factory=AugmentPolicy)
    io: IOConfig = field(default_factory=IOConfig)
    mapping: Dict[str, int] = field(default_factory=_default_mapping)

    def label_mapping(self) -> Dict[int, int]:
        return {int(k): int(v) for k, v in self.mapping.items()}


def _coerce(value: Any, default: Any, where: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or len(value) != len(default):
            raise ConfigError(f"{where}: expected a list of {len(default)} values, got {value!r}")
        return tuple(_coerce(v, d, where) for v, d in zip(value, default))
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def _build_section(cls, table: Mapping[str, Any], name: str):
    if not isinstance(table, Mapping):
        raise ConfigError(f"[{name}] must be a table")
    defaults = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - known)
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {', '.join(unknown)}")
    kwargs = {k: _coerce(v, getattr(defaults, k), f"{name}.{k}") for k, v in table.items()}
    try:
        return dataclasses.replace(defaults, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def config_from_dict(doc: Mapping[str, Any]) -> PipelineConfig:
    sections = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(doc) - set(sections))
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")
    kwargs: Dict[str, Any] = {}
    base = PipelineConfig()
    for name, value in doc.items():
        if name == "mapping":
            if not isinstance(value, Mapping):
                raise ConfigError("[mapping] must be a table of label id -> layout class")
            bad = {k: v for k, v in value.items()
                   if not str(k).isdigit() or isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= 3}
            if bad:
                raise ConfigError(f"[mapping] entries must map integer ids to 0..3: {bad}")
            kwargs[name] = {str(k): int(v) for k, v in value.items()}
        else:
            kwargs[name] = _build_section(type(getattr(base, name)), value, name)
    return dataclasses.replace(base, **kwargs)


def load_config(path: Path | str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        doc = tomli.loads(Path(path).read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return config_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_to_dict(cfg: PipelineConfig) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = {k: (list(v) if isinstance(v, tuple) else v)
                           for k, v in dataclasses.asdict(value).items()}
        else:
            out[f.name] = dict(value)
    return out


def dump_config(cfg: PipelineConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))
