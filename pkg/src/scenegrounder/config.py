"""Declarative pipeline configuration.

One YAML file configures every stage; unknown keys are rejected so typos
fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .ingest import FilterConfig
from .objectmap import AssociationConfig
from .reasoner import PromptTemplates


@dataclass
class IngestConfig:
    subsample_stride: int = 2

    def validate(self):
        if self.subsample_stride < 1:
            raise ValueError("subsample_stride must be >= 1")


@dataclass
class ViewConfig:
    num_views: int = 5
    splat_radius_px: int = 2
    occlusion_tol: float = 0.05
    crop_pad_px: int = 10

    def validate(self):
        if self.num_views < 1:
            raise ValueError("num_views must be >= 1")
        if self.splat_radius_px < 0 or self.crop_pad_px < 0:
            raise ValueError("pixel radii must be >= 0")
        if self.occlusion_tol < 0:
            raise ValueError("occlusion_tol must be >= 0")


@dataclass
class EndpointConfig:
    """Which LLM endpoint `ground` uses; http settings come from env vars."""

    kind: str = "mock"  # mock | http | replay
    replay_path: str = ""
    max_tokens: int = 256

    def validate(self):
        if self.kind not in ("mock", "http", "replay"):
            raise ValueError(f"endpoint kind must be mock|http|replay, got {self.kind!r}")
        if self.kind == "replay" and not self.replay_path:
            raise ValueError("replay endpoint needs replay_path")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass
class PipelineConfig:
    filter: FilterConfig = field(default_factory=FilterConfig)
    association: AssociationConfig = field(default_factory=AssociationConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    views: ViewConfig = field(default_factory=ViewConfig)
    prompts: PromptTemplates = field(default_factory=PromptTemplates)
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)

    def validate(self):
        self.filter.validate()
        self.association.validate()
        self.ingest.validate()
        self.views.validate()
        self.endpoint.validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "filter": FilterConfig,
    "association": AssociationConfig,
    "ingest": IngestConfig,
    "views": ViewConfig,
    "prompts": PromptTemplates,
    "endpoint": EndpointConfig,
}


def _build_section(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{where}: {err}")


def config_from_dict(data: dict, source: str = "<config>") -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"{source}: unknown sections {unknown}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build_section(cls, data[name], f"{source}:{name}")
    config = PipelineConfig(**kwargs)
    try:
        config.validate()
    except ValueError as err:
        raise ConfigError(f"{source}: {err}")
    return config


def load_config(path: str | Path | None) -> PipelineConfig:
    """Load the YAML config, or return defaults when no path is given."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file")
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: invalid YAML: {err}")
    return config_from_dict(data or {}, str(path))
