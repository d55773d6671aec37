"""CSV, manifest and metrics files for a finished run.

Everything except ``timing.json`` is a pure function of the configuration,
so identical manifests give byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import platform
from importlib import metadata
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .. import __version__
from ..errors import InvalidArgumentError
from .runner import RunMetrics

FLOAT_FORMAT = ".10g"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if np.isnan(v):
        return "nan"
    return format(v, FLOAT_FORMAT)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _versions() -> dict:
    out = {"hatchbandit": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "scikit-learn", "PyYAML"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def manifest(metrics: RunMetrics) -> dict:
    return {
        "format": "hatchbandit.run_manifest",
        "version": 1,
        "config": metrics.config.to_dict(),
        "root_seed": metrics.config.seed,
        "shared_seed": metrics.shared_seed,
        "replica_seeds": [dataclasses.asdict(r.seeds) for r in metrics.replicas],
        "rounds": [r.rounds for r in metrics.replicas],
        "exhausted": [r.exhausted for r in metrics.replicas],
        "executed": [r.executed_total for r in metrics.replicas],
        "versions": _versions(),
    }


def emit_reports(metrics: RunMetrics, output_dir: Union[str, Path], *, save_metrics: bool = True) -> dict:
    """Write the run's files into ``output_dir`` and return their paths by name."""
    if not metrics.replicas:
        raise InvalidArgumentError("cannot report an empty replica set")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = metrics.rounds
    rounds = np.arange(1, n + 1)
    files = {}

    if metrics.has_regret:
        mean, std = metrics.series("cumulative_regret")
        fmean, fstd = metrics.series("cumulative_regret_full")
        files["regret_curve"] = out / "regret_curve.csv"
        _write_csv(
            files["regret_curve"],
            ("round", "mean", "std", "regret_full_mean", "regret_full_std"),
            zip(rounds, mean, std, fmean, fstd),
        )

    mean, std = metrics.ctr()
    rmean, _ = metrics.series("cumulative_reward")
    files["ctr_curve"] = out / "ctr_curve.csv"
    _write_csv(files["ctr_curve"], ("round", "mean", "std", "cumulative_reward_mean"), zip(rounds, mean, std, rmean))

    table = metrics.allocation_table()
    files["allocation_by_class"] = out / "allocation_by_class.csv"
    _write_csv(
        files["allocation_by_class"],
        ("class", "allocation_rate", "occupancy_rate", "mean_reward"),
        zip(range(len(table["allocation_rate"])), table["allocation_rate"], table["occupancy_rate"], table["mean_reward"]),
    )

    mean, std = metrics.series("budget_trace")
    files["budget_trace"] = out / "budget_trace.csv"
    _write_csv(files["budget_trace"], ("round", "mean", "std"), zip(rounds, mean, std))

    files["manifest"] = out / "manifest.json"
    files["manifest"].write_text(json.dumps(manifest(metrics), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    files["timing"] = out / "timing.json"
    timing = {"replica_seconds": [r.duration for r in metrics.replicas],
              "total_seconds": float(sum(r.duration for r in metrics.replicas))}
    files["timing"].write_text(json.dumps(timing, indent=2) + "\n", encoding="utf-8")

    if save_metrics:
        files["metrics"] = out / "metrics.npz"
        metrics.save(files["metrics"])
    return files
