"""Benchmark environments: synthetic world, context clustering, replay evaluation."""

from .clustering import ClusterMethod, ClusterModel, assign_class, fit_clusters
from .events import Event, EventLog, read_event_log, write_event_log
from .replay import EvaluationReport, replay_evaluate
from .synthetic import PAPER_PHI, SyntheticConfig, SyntheticWorld, generate_synthetic

__all__ = [
    "ClusterMethod",
    "ClusterModel",
    "EvaluationReport",
    "Event",
    "EventLog",
    "PAPER_PHI",
    "SyntheticConfig",
    "SyntheticWorld",
    "assign_class",
    "fit_clusters",
    "generate_synthetic",
    "read_event_log",
    "replay_evaluate",
    "write_event_log",
]
