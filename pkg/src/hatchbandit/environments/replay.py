"""Offline replay evaluation with a static class distribution.

Logged events are bucketed by class.  Each round draws a class from ``phi``
and then draws events from that bucket, without replacement within the round,
until the policy's recommended arm equals the logged arm.  The matched event
is removed from its bucket and fed back to the policy; if the policy skipped
the round (retain gate or exhausted budget) the event is still consumed but
earns no reward.  Rejected events stay available for later rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError
from ..policy import Policy
from .clustering import ClusterModel
from .events import EventLog


@dataclass
class EvaluationReport:
    requested_rounds: int
    rounds: int
    exhausted: bool
    cumulative_reward: np.ndarray
    sampled_classes: np.ndarray
    executed: np.ndarray
    budget_trace: np.ndarray
    class_rounds: np.ndarray
    class_executed: np.ndarray
    class_reward: np.ndarray
    consumed: int
    rejected: int
    extra: dict = field(default_factory=dict)

    @property
    def ctr(self) -> np.ndarray:
        """Running average reward ``R_t / t``."""
        return self.cumulative_reward / np.arange(1, self.rounds + 1)

    @property
    def final_ctr(self) -> float:
        return float(self.cumulative_reward[-1] / self.rounds) if self.rounds else 0.0

    @property
    def acceptance_rate(self) -> float:
        attempts = self.consumed + self.rejected
        return self.consumed / attempts if attempts else 0.0

    @property
    def allocation_rate(self) -> np.ndarray:
        """Share of each class's rounds on which the action was executed."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.class_rounds > 0, self.class_executed / np.maximum(self.class_rounds, 1), 0.0)

    @property
    def occupancy_rate(self) -> np.ndarray:
        total = self.class_executed.sum()
        if total == 0:
            return np.zeros_like(self.class_executed, dtype=float)
        return self.class_executed / total

    @property
    def mean_reward(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.class_executed > 0, self.class_reward / np.maximum(self.class_executed, 1), np.nan)


def bucket_events(log: EventLog, model: ClusterModel) -> list:
    labels = model.assign_classes(log.x)
    return [list(np.flatnonzero(labels == j)) for j in range(model.n_classes)]


def replay_evaluate(
    log: EventLog,
    model: ClusterModel,
    phi,
    policy: Policy,
    T: int,
    seed: int,
) -> EvaluationReport:
    """Run ``policy`` for up to ``T`` rounds against ``log``.

    Stops early, with ``exhausted=True``, when the sampled class has no
    remaining event whose logged arm matches the policy's recommendation.
    """
    phi = np.asarray(phi, dtype=float)
    if T < 1:
        raise InvalidArgumentError("T must be at least 1")
    if log.dim != model.dim:
        raise InvalidArgumentError(f"log has dim {log.dim}, cluster model has dim {model.dim}")
    if phi.shape != (model.n_classes,) or abs(phi.sum() - 1.0) > 1e-6 or np.any(phi < 0):
        raise InvalidArgumentError("phi must be a distribution over the model's classes")
    if policy.n_classes != model.n_classes:
        raise InvalidArgumentError("policy and cluster model disagree on the number of classes")

    rng = np.random.default_rng(seed)
    cum_phi = np.cumsum(phi)
    cum_phi[-1] = 1.0
    buckets = bucket_events(log, model)
    J = model.n_classes
    X, A, R = log.x, log.a, log.r

    cumulative = np.zeros(T)
    sampled = np.zeros(T, dtype=np.int64)
    executed = np.zeros(T, dtype=bool)
    budget_trace = np.zeros(T, dtype=np.int64)
    class_rounds = np.zeros(J, dtype=np.int64)
    class_executed = np.zeros(J, dtype=np.int64)
    class_reward = np.zeros(J)
    consumed = rejected = 0
    total = 0.0
    rounds = 0
    exhausted = False

    for t in range(T):
        j = int(np.searchsorted(cum_phi, rng.random(), side="right"))
        bucket = buckets[j]
        untried = len(bucket)
        match = None
        while untried > 0:
            k = int(rng.integers(untried))
            idx = bucket[k]
            decision = policy.decide(X[idx], class_id=j)
            if decision.arm is not None and decision.arm == A[idx]:
                match = k
                break
            rejected += 1
            untried -= 1
            bucket[k], bucket[untried] = bucket[untried], bucket[k]
        if match is None:
            exhausted = True
            break

        idx = bucket[match]
        bucket[match] = bucket[-1]
        bucket.pop()
        consumed += 1
        sampled[t] = j
        class_rounds[j] += 1
        if decision.executed:
            r = int(R[idx])
            policy.feedback(decision, X[idx], r)
            total += r
            executed[t] = True
            class_executed[j] += 1
            class_reward[j] += r
        else:
            policy.skip(decision)
        cumulative[t] = total
        budget_trace[t] = policy.budget.remaining_budget
        rounds = t + 1

    return EvaluationReport(
        requested_rounds=T,
        rounds=rounds,
        exhausted=exhausted,
        cumulative_reward=cumulative[:rounds],
        sampled_classes=sampled[:rounds],
        executed=executed[:rounds],
        budget_trace=budget_trace[:rounds],
        class_rounds=class_rounds,
        class_executed=class_executed,
        class_reward=class_reward,
        consumed=consumed,
        rejected=rejected,
    )
