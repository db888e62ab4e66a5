"""Pipeline configuration: YAML file + CLI flag overrides, validated before
any work. Unknown keys are hard errors."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import yaml

from .errors import ConfigError
from .segmenter import SegmenterConfig
from .tagging import EnergyThresholds, TempoThresholds


@dataclass
class CaptionerConfig:
    omit_probability: float = 0.2
    shuffle: bool = False  # full shuffle instead of circular rotation
    grammar_path: str | None = None
    fallback: bool = True


@dataclass
class EvalConfig:
    bins: int = 32
    alpha: float = 1e-6
    exclude_prefix: bool = True


@dataclass
class PipelineConfig:
    input_dir: str | None = None
    output_dir: str | None = None
    global_seed: int = 0
    workers: int = 1
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    tempo_thresholds: TempoThresholds = field(default_factory=TempoThresholds)
    energy_thresholds: EnergyThresholds = field(default_factory=EnergyThresholds)
    captioner: CaptionerConfig = field(default_factory=CaptionerConfig)
    adapters: dict = field(default_factory=dict)       # task -> command line
    adapter_timeouts: dict = field(default_factory=dict)
    eval: EvalConfig = field(default_factory=EvalConfig)


_SECTION_TYPES = {
    "segmenter": SegmenterConfig,
    "tempo_thresholds": TempoThresholds,
    "energy_thresholds": EnergyThresholds,
    "captioner": CaptionerConfig,
    "eval": EvalConfig,
}
_SCALAR_KEYS = {"input_dir", "output_dir", "global_seed", "workers"}
_DICT_KEYS = {"adapters", "adapter_timeouts"}


def _build_section(cls, data: dict, section: str):
    valid = {f.name for f in fields(cls)}
    unknown = set(data) - valid
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{section}' config: {exc}") from exc


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")

    unknown = set(data) - _SCALAR_KEYS - _DICT_KEYS - set(_SECTION_TYPES)
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")

    cfg = PipelineConfig()
    for key in _SCALAR_KEYS:
        if key in data:
            setattr(cfg, key, data[key])
    for key in _DICT_KEYS:
        if key in data:
            value = data[key]
            if not isinstance(value, dict):
                raise ConfigError(f"'{key}' must be a mapping")
            setattr(cfg, key, dict(value))
    for key, cls in _SECTION_TYPES.items():
        if key in data:
            if not isinstance(data[key], dict):
                raise ConfigError(f"'{key}' must be a mapping")
            setattr(cfg, key, _build_section(cls, data[key], key))
    return cfg
