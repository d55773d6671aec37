"""Experiment configuration and its key-value file form (YAML or JSON)."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from ..environments.clustering import ClusterMethod
from ..environments.synthetic import SyntheticConfig
from ..errors import InvalidArgumentError
from ..policy import PolicyConfig


class EnvironmentKind(str, Enum):
    SYNTHETIC = "synthetic"
    REPLAY_LOG = "replay_log"


@dataclass
class ExperimentConfig:
    environment: EnvironmentKind = EnvironmentKind.SYNTHETIC
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    rho: float = 0.25
    horizon: int = 10000
    replicas: int = 5
    seed: int = 0
    output_dir: str = "results"
    # synthetic environment
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    # replay environment
    log_path: Optional[str] = None
    cluster_model_path: Optional[str] = None
    n_classes: int = 10
    cluster_method: ClusterMethod = ClusterMethod.GAUSSIAN_MIXTURE
    cluster_fraction: float = 0.5
    workers: int = 1

    def __post_init__(self) -> None:
        self.environment = EnvironmentKind(self.environment)
        self.cluster_method = ClusterMethod(self.cluster_method)
        if not (self.rho >= 0) or not math.isfinite(self.rho):
            raise InvalidArgumentError(f"rho must be a non-negative number, got {self.rho!r}")
        if self.horizon < 1:
            raise InvalidArgumentError("horizon must be positive")
        if self.replicas < 1:
            raise InvalidArgumentError("replicas must be at least 1")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be at least 1")
        if self.environment is EnvironmentKind.REPLAY_LOG and not self.log_path:
            raise InvalidArgumentError("replay_log environment needs log_path")
        if not (0.0 < self.cluster_fraction <= 1.0):
            raise InvalidArgumentError("cluster_fraction must lie in (0, 1]")

    @property
    def budget(self) -> int:
        return int(math.floor(self.rho * self.horizon))

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, PolicyConfig):
                value = value.to_dict()
            elif isinstance(value, SyntheticConfig):
                value = value.to_dict()
            elif isinstance(value, Enum):
                value = value.value
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise InvalidArgumentError("configuration must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown configuration keys: {sorted(unknown)}")
        data = dict(data)
        try:
            if "policy" in data:
                data["policy"] = _build(PolicyConfig, data["policy"])
            if "synthetic" in data:
                data["synthetic"] = _build(SyntheticConfig, data["synthetic"])
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidArgumentError):
                raise
            raise InvalidArgumentError(f"invalid configuration: {exc}") from exc


def _build(kind, data: Any):
    if isinstance(data, kind):
        return data
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{kind.__name__} section must be a mapping")
    known = {f.name for f in dataclasses.fields(kind)}
    unknown = set(data) - known
    if unknown:
        raise InvalidArgumentError(f"unknown {kind.__name__} keys: {sorted(unknown)}")
    return kind(**data)


def load_mapping(path: Union[str, Path]) -> dict:
    """Read a YAML (or JSON, a YAML subset) mapping from ``path``."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidArgumentError(f"{path}: not valid YAML/JSON: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{path}: top level must be a mapping")
    return data


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    return ExperimentConfig.from_dict(load_mapping(path))
