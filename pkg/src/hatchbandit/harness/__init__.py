"""Experiment configuration, replicated runs, reports, snapshots and the CLI."""

from .config import EnvironmentKind, ExperimentConfig, load_config
from .reports import emit_reports
from .runner import ReplicaMetrics, ReplicaSeeds, RunMetrics, derive_seeds, run_experiment
from .snapshot import restore, restore_into, snapshot

__all__ = [
    "EnvironmentKind",
    "ExperimentConfig",
    "ReplicaMetrics",
    "ReplicaSeeds",
    "RunMetrics",
    "derive_seeds",
    "emit_reports",
    "load_config",
    "restore",
    "restore_into",
    "run_experiment",
    "snapshot",
]
