"""Command-line entry point.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 I/O or file
format error, 4 replay evaluation ran out of matching events.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..environments.clustering import ClusterMethod, fit_clusters
from ..environments.events import read_event_log, write_event_log
from ..environments.synthetic import generate_synthetic
from ..errors import InvalidArgumentError, SnapshotFormatError
from .config import EnvironmentKind, ExperimentConfig, load_config, load_mapping
from .reports import emit_reports
from .runner import RunMetrics, run_experiment

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_EXHAUSTED = 4

logger = logging.getLogger("hatchbandit")


def _cmd_generate(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    syn = cfg.synthetic if args.seed is None else dataclasses.replace(cfg.synthetic, seed=args.seed)
    world = generate_synthetic(syn)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log = world.sample_log(args.events, seed=syn.seed + 1)
    write_event_log(log, out / "events.jsonl")
    np.savez_compressed(
        out / "world.npz",
        u=world.u, sigma=world.sigma, w=world.w, contexts=world.contexts, labels=world.labels,
        config=np.array(json.dumps(syn.to_dict(), sort_keys=True)),
    )
    print(f"wrote {len(log)} events to {out / 'events.jsonl'}")
    return EXIT_OK


def _cmd_cluster(args) -> int:
    log = read_event_log(args.log)
    model = fit_clusters(log.x, args.classes, args.method, seed=args.seed)
    model.save(args.out)
    phi = ", ".join(f"{p:.4f}" for p in model.phi)
    print(f"fitted {model.n_classes} classes ({model.method.value}); phi = [{phi}]")
    return EXIT_OK


def _load_experiment(args) -> ExperimentConfig:
    data = load_mapping(args.config)
    if getattr(args, "output_dir", None):
        data["output_dir"] = args.output_dir
    if getattr(args, "workers", None):
        data["workers"] = args.workers
    return ExperimentConfig.from_dict(data)


def _finish(metrics: RunMetrics, output_dir) -> int:
    files = emit_reports(metrics, output_dir)
    final_ctr = metrics.final_ctr()
    line = f"replicas={len(metrics.replicas)} rounds={metrics.rounds} ctr={final_ctr.mean():.6g}"
    if metrics.has_regret:
        line += f" regret={metrics.final('cumulative_regret').mean():.6g}"
    print(line)
    print(f"reports in {Path(files['manifest']).parent}")
    if any(r.exhausted for r in metrics.replicas):
        logger.error("replay ran out of matching events before the horizon")
        return EXIT_EXHAUSTED
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load_experiment(args)
    return _finish(run_experiment(cfg), cfg.output_dir)


def _cmd_evaluate(args) -> int:
    data = load_mapping(args.config)
    data["environment"] = EnvironmentKind.REPLAY_LOG.value
    if args.log:
        data["log_path"] = args.log
    if args.model:
        data["cluster_model_path"] = args.model
    if args.output_dir:
        data["output_dir"] = args.output_dir
    cfg = ExperimentConfig.from_dict(data)
    return _finish(run_experiment(cfg), cfg.output_dir)


def _cmd_report(args) -> int:
    metrics = RunMetrics.load(args.metrics)
    emit_reports(metrics, args.output_dir, save_metrics=False)
    print(f"reports in {args.output_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hatchbandit", description="Budgeted contextual bandit experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic world and a uniform-logging event log")
    p.add_argument("--config", help="experiment config; its 'synthetic' section is used")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--events", type=int, default=100000)
    p.add_argument("--seed", type=int, default=None, help="override synthetic.seed")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("cluster", help="fit a context-to-class model from an event log")
    p.add_argument("--log", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--method", choices=[m.value for m in ClusterMethod], default=ClusterMethod.GAUSSIAN_MIXTURE.value)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("evaluate", help="replay-evaluate a policy on an event log")
    p.add_argument("--config", required=True)
    p.add_argument("--log")
    p.add_argument("--model", help="stored cluster model; fitted from the log when omitted")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="re-emit CSV reports from stored metrics")
    p.add_argument("--metrics", required=True)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InvalidArgumentError as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_INVALID
    except (OSError, SnapshotFormatError) as exc:
        logger.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
