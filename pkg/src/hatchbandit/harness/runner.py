"""Replicated experiment runs and their aggregated metrics.

Randomness: ``SeedSequence(cfg.seed)`` spawns one child per replica, and each
child spawns three streams (world, environment, policy).  A shared stream,
spawned after the replicas, drives the one-off cluster fit in replay mode.
Replica seeds therefore depend only on ``cfg.seed`` and the replica index,
so different policies under the same seed see the same worlds.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from scipy.special import ndtr

from ..allocation import BudgetState
from ..environments.clustering import ClusterModel, fit_clusters
from ..environments.events import EventLog, read_event_log
from ..environments.replay import replay_evaluate
from ..environments.synthetic import SyntheticWorld, generate_synthetic
from ..errors import InvalidArgumentError
from ..policy import make_policy, with_seed
from .config import EnvironmentKind, ExperimentConfig


@dataclass
class ReplicaSeeds:
    replica: int
    world_seed: int
    env_seed: int
    policy_seed: int

    @classmethod
    def derive(cls, replica: int, seq: np.random.SeedSequence) -> "ReplicaSeeds":
        world, env, pol = (int(s.generate_state(1)[0]) for s in seq.spawn(3))
        return cls(replica, world, env, pol)


def derive_seeds(root_seed: int, replicas: int) -> tuple[List[ReplicaSeeds], int]:
    """Per-replica seeds plus the shared seed used for cluster fitting."""
    root = np.random.SeedSequence(root_seed)
    children = root.spawn(replicas)
    shared = int(root.spawn(1)[0].generate_state(1)[0])
    return [ReplicaSeeds.derive(i, c) for i, c in enumerate(children)], shared


@dataclass
class ReplicaMetrics:
    seeds: ReplicaSeeds
    rounds: int
    exhausted: bool
    cumulative_reward: np.ndarray
    budget_trace: np.ndarray
    class_rounds: np.ndarray
    class_executed: np.ndarray
    class_reward: np.ndarray
    cumulative_regret: Optional[np.ndarray] = None
    cumulative_regret_full: Optional[np.ndarray] = None
    duration: float = 0.0

    @property
    def executed_total(self) -> int:
        return int(self.class_executed.sum())


def _std(a: np.ndarray) -> np.ndarray:
    return a.std(axis=0, ddof=1) if a.shape[0] > 1 else np.zeros(a.shape[1:])


@dataclass
class RunMetrics:
    """Replica results plus the aggregates the reports need.

    Series are cut to the shortest replica, which only differs from the
    horizon when a replay run ran out of matching events.
    """

    config: ExperimentConfig
    replicas: List[ReplicaMetrics]
    shared_seed: int = 0
    extra: dict = field(default_factory=dict)

    def _require(self) -> None:
        if not self.replicas:
            raise InvalidArgumentError("no replicas to aggregate")

    @property
    def rounds(self) -> int:
        self._require()
        return min(r.rounds for r in self.replicas)

    @property
    def has_regret(self) -> bool:
        return bool(self.replicas) and self.replicas[0].cumulative_regret is not None

    def _stack(self, name: str) -> np.ndarray:
        n = self.rounds
        return np.stack([getattr(r, name)[:n] for r in self.replicas])

    def series(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Mean and standard deviation across replicas of a per-round series."""
        a = self._stack(name).astype(float)
        return a.mean(axis=0), _std(a)

    def ctr(self) -> tuple[np.ndarray, np.ndarray]:
        a = self._stack("cumulative_reward") / np.arange(1, self.rounds + 1)
        return a.mean(axis=0), _std(a)

    def final(self, name: str) -> np.ndarray:
        """Last value of a series for each replica."""
        self._require()
        return np.array([getattr(r, name)[r.rounds - 1] if r.rounds else 0.0 for r in self.replicas], dtype=float)

    def final_ctr(self) -> np.ndarray:
        return np.array([r.cumulative_reward[r.rounds - 1] / r.rounds if r.rounds else 0.0 for r in self.replicas])

    def class_totals(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        self._require()
        rounds = np.sum([r.class_rounds for r in self.replicas], axis=0)
        executed = np.sum([r.class_executed for r in self.replicas], axis=0)
        reward = np.sum([r.class_reward for r in self.replicas], axis=0)
        return rounds, executed, reward

    def allocation_table(self) -> dict:
        """Per-class allocation rate, occupancy rate and mean reward, pooled over replicas.

        Occupancy is all zeros when nothing was executed (for example rho = 0).
        """
        rounds, executed, reward = self.class_totals()
        alloc = np.divide(executed, rounds, out=np.zeros(len(rounds)), where=rounds > 0)
        total = executed.sum()
        occupancy = executed / total if total else np.zeros(len(executed))
        mean_reward = np.divide(reward, executed, out=np.full(len(rounds), np.nan), where=executed > 0)
        return {"allocation_rate": alloc, "occupancy_rate": occupancy, "mean_reward": mean_reward}

    # -- persistence ----------------------------------------------------
    def save(self, path: Union[str, Path]) -> None:
        self._require()
        arrays = {
            "config": np.array(json.dumps(self.config.to_dict(), sort_keys=True)),
            "seeds": np.array(json.dumps([dataclasses.asdict(r.seeds) for r in self.replicas])),
            "shared_seed": np.array(self.shared_seed, dtype=np.uint64),
            "rounds": np.array([r.rounds for r in self.replicas]),
            "exhausted": np.array([r.exhausted for r in self.replicas]),
            "duration": np.array([r.duration for r in self.replicas]),
        }
        for i, r in enumerate(self.replicas):
            for name in ("cumulative_reward", "budget_trace", "class_rounds", "class_executed", "class_reward",
                         "cumulative_regret", "cumulative_regret_full"):
                value = getattr(r, name)
                if value is not None:
                    arrays[f"r{i}_{name}"] = value
        with Path(path).open("wb") as fh:
            np.savez_compressed(fh, **arrays)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunMetrics":
        with np.load(path, allow_pickle=False) as z:
            config = ExperimentConfig.from_dict(json.loads(str(z["config"])))
            seeds = [ReplicaSeeds(**s) for s in json.loads(str(z["seeds"]))]
            replicas = []
            for i, s in enumerate(seeds):
                get = lambda name: z[f"r{i}_{name}"] if f"r{i}_{name}" in z.files else None  # noqa: E731
                replicas.append(
                    ReplicaMetrics(
                        seeds=s,
                        rounds=int(z["rounds"][i]),
                        exhausted=bool(z["exhausted"][i]),
                        cumulative_reward=get("cumulative_reward"),
                        budget_trace=get("budget_trace"),
                        class_rounds=get("class_rounds"),
                        class_executed=get("class_executed"),
                        class_reward=get("class_reward"),
                        cumulative_regret=get("cumulative_regret"),
                        cumulative_regret_full=get("cumulative_regret_full"),
                        duration=float(z["duration"][i]),
                    )
                )
            return cls(config, replicas, int(z["shared_seed"]))


# -- synthetic ------------------------------------------------------------
def run_synthetic_replica(cfg: ExperimentConfig, seeds: ReplicaSeeds, world: Optional[SyntheticWorld] = None) -> ReplicaMetrics:
    """One replica on a freshly generated (or supplied) synthetic world.

    Regret accrues ``best(x) - mean(x, arm)`` on executed rounds only; the
    ``regret_full`` series also charges ``best(x)`` on every skipped round.
    """
    start = time.perf_counter()
    if world is None:
        world = generate_synthetic(dataclasses.replace(cfg.synthetic, seed=seeds.world_seed))
    T = cfg.horizon
    rng = np.random.default_rng(seeds.env_seed)
    cls, X, noise = world.sample_stream(T, rng)
    thr = world.config.reward_threshold
    means = world.u[cls][:, None] + world.sigma[cls] + np.einsum("nkd,nd->nk", world.w[cls], X)
    expected = ndtr(means - thr)
    best = expected.max(axis=1)

    budget = BudgetState.from_ratio(cfg.rho, T)
    policy = make_policy(
        with_seed(cfg.policy, seeds.policy_seed),
        n_arms=world.n_arms,
        budget=budget,
        centers=world.class_centers(),
        phi=world.phi,
    )
    J = world.n_classes
    reward = np.zeros(T)
    trace = np.zeros(T, dtype=np.int64)
    executed = np.zeros(T, dtype=bool)
    chosen = np.zeros(T, dtype=np.int64)
    for t in range(T):
        j = int(cls[t])
        d = policy.decide(X[t], class_id=j)
        if d.executed:
            r = int(means[t, d.arm] + noise[t] >= thr)
            policy.feedback(d, X[t], r)
            reward[t] = r
            executed[t] = True
            chosen[t] = d.arm
        else:
            policy.skip(d)
        trace[t] = policy.budget.remaining_budget
    gap = np.where(executed, best - expected[np.arange(T), chosen], 0.0)
    regret = np.cumsum(gap)
    regret_full = np.cumsum(np.where(executed, gap, best))
    return ReplicaMetrics(
        seeds=seeds,
        rounds=T,
        exhausted=False,
        cumulative_reward=np.cumsum(reward),
        budget_trace=trace,
        class_rounds=np.bincount(cls, minlength=J),
        class_executed=np.bincount(cls[executed], minlength=J),
        class_reward=np.bincount(cls, weights=reward, minlength=J),
        cumulative_regret=regret,
        cumulative_regret_full=regret_full,
        duration=time.perf_counter() - start,
    )


# -- replay ---------------------------------------------------------------
def prepare_replay(cfg: ExperimentConfig, shared_seed: int) -> tuple[EventLog, ClusterModel]:
    """Load the log and obtain the context-to-class mapping.

    Without a stored model, one is fitted on a random ``cluster_fraction`` of
    the log; the whole log is then replayed.
    """
    path = Path(cfg.log_path)
    if not path.is_file():
        raise FileNotFoundError(f"event log not found: {path}")
    log = read_event_log(path)
    if cfg.cluster_model_path:
        model = ClusterModel.load(cfg.cluster_model_path)
    else:
        rng = np.random.default_rng(shared_seed)
        n_fit = max(cfg.n_classes, int(math.ceil(cfg.cluster_fraction * len(log))))
        idx = np.sort(rng.choice(len(log), size=min(n_fit, len(log)), replace=False))
        model = fit_clusters(log.x[idx], cfg.n_classes, cfg.cluster_method, seed=int(shared_seed % 2**31))
    if model.dim != log.dim:
        raise InvalidArgumentError(f"log has dim {log.dim}, cluster model has dim {model.dim}")
    return log, model


def run_replay_replica(cfg: ExperimentConfig, seeds: ReplicaSeeds, log: EventLog, model: ClusterModel) -> ReplicaMetrics:
    start = time.perf_counter()
    budget = BudgetState.from_ratio(cfg.rho, cfg.horizon)
    policy = make_policy(
        with_seed(cfg.policy, seeds.policy_seed),
        n_arms=log.n_arms,
        budget=budget,
        centers=model.centers,
        phi=model.phi,
        classifier=model.assign_class,
    )
    rep = replay_evaluate(log, model, model.phi, policy, cfg.horizon, seeds.env_seed)
    return ReplicaMetrics(
        seeds=seeds,
        rounds=rep.rounds,
        exhausted=rep.exhausted,
        cumulative_reward=rep.cumulative_reward,
        budget_trace=rep.budget_trace,
        class_rounds=rep.class_rounds,
        class_executed=rep.class_executed,
        class_reward=rep.class_reward,
        duration=time.perf_counter() - start,
    )


def _replica_job(args) -> ReplicaMetrics:
    cfg, seeds, shared = args
    if cfg.environment is EnvironmentKind.SYNTHETIC:
        return run_synthetic_replica(cfg, seeds)
    log, model = shared
    return run_replay_replica(cfg, seeds, log, model)


def run_experiment(cfg: ExperimentConfig) -> RunMetrics:
    """Run every replica (in worker processes when ``cfg.workers > 1``)."""
    seeds, shared_seed = derive_seeds(cfg.seed, cfg.replicas)
    shared = None
    extra = {}
    if cfg.environment is EnvironmentKind.REPLAY_LOG:
        log, model = prepare_replay(cfg, shared_seed)
        shared = (log, model)
        extra["cluster_model"] = model
    jobs = [(cfg, s, shared) for s in seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            replicas = list(pool.map(_replica_job, jobs))
    else:
        replicas = [_replica_job(j) for j in jobs]
    return RunMetrics(cfg, replicas, shared_seed, extra)
