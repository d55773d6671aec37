"""Budgeted decision policies: HATCH and the comparison baselines.

Every policy owns its :class:`BudgetState` and random generator and follows
the same protocol each round::

    decision = policy.decide(x, class_id)
    if decision.executed:
        policy.feedback(decision, x, reward)
    else:
        policy.skip(decision)

``decide`` never mutates learning state, so an offline evaluator may call it
repeatedly on candidate events before committing to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .allocation import (
    AllocationState,
    AlphaTildeMode,
    BudgetState,
    dra_retain,
    make_allocation,
)
from .errors import ContractViolationError, InvalidArgumentError
from .linear import NORM_TOLERANCE, ArmModels


class PolicyKind(str, Enum):
    HATCH = "hatch"
    GREEDY_LINUCB = "greedy_linucb"
    RANDOM_LINUCB = "random_linucb"
    CLUSTER_UCB_ALP = "cluster_ucb_alp"
    UNIFORM_RANDOM = "uniform_random"


@dataclass
class PolicyConfig:
    policy_kind: PolicyKind = PolicyKind.HATCH
    lam: float = 1.0
    delta: float = 0.1
    alpha_override: Optional[float] = None
    alpha_tilde_mode: AlphaTildeMode = AlphaTildeMode.CONSTANT
    optimistic_allocation: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        self.policy_kind = PolicyKind(self.policy_kind)
        self.alpha_tilde_mode = AlphaTildeMode(self.alpha_tilde_mode)
        if not (self.lam > 0):
            raise InvalidArgumentError(f"lambda must be positive, got {self.lam}")
        if not (0.0 < self.delta < 1.0):
            raise InvalidArgumentError(f"delta must lie in (0, 1), got {self.delta}")
        if self.alpha_override is not None and self.alpha_override < 0:
            raise InvalidArgumentError("alpha_override must be non-negative")

    def to_dict(self) -> dict:
        return {
            "policy_kind": self.policy_kind.value,
            "lam": self.lam,
            "delta": self.delta,
            "alpha_override": self.alpha_override,
            "alpha_tilde_mode": self.alpha_tilde_mode.value,
            "optimistic_allocation": self.optimistic_allocation,
            "seed": self.seed,
        }


@dataclass
class Decision:
    arm: Optional[int]
    class_id: int
    retain_prob: float
    executed: bool
    scores: np.ndarray = field(repr=False, default=None)

    @property
    def cost(self) -> int:
        return 1 if self.executed else 0


class Policy:
    """Shared plumbing: budget gate, class resolution, skip handling, counters."""

    kind: PolicyKind

    def __init__(
        self,
        config: PolicyConfig,
        n_arms: int,
        dim: int,
        budget: BudgetState,
        n_classes: int = 1,
        classifier: Optional[Callable[[np.ndarray], int]] = None,
    ) -> None:
        if n_arms < 1 or dim < 1 or n_classes < 1:
            raise InvalidArgumentError("n_arms, dim and n_classes must be positive")
        self.config = config
        self.n_arms = int(n_arms)
        self.dim = int(dim)
        self.n_classes = int(n_classes)
        self.budget = budget
        self.classifier = classifier
        self.rng = np.random.default_rng(config.seed)
        self.executed_by_class = np.zeros(self.n_classes, dtype=np.int64)
        self.seen_by_class = np.zeros(self.n_classes, dtype=np.int64)

    # -- protocol -------------------------------------------------------
    def decide(self, x, class_id: Optional[int] = None) -> Decision:
        raise NotImplementedError

    def feedback(self, decision: Decision, x, r: float) -> None:
        if not decision.executed:
            raise ContractViolationError("feedback is only observed for executed decisions")
        x = self._check_context(x)
        self._learn(decision, x, float(r))
        self.budget.step(True)
        self.seen_by_class[decision.class_id] += 1
        self.executed_by_class[decision.class_id] += 1

    def skip(self, decision: Decision) -> None:
        if decision.executed:
            raise ContractViolationError("an executed decision must receive feedback")
        self.budget.step(False)
        self.seen_by_class[decision.class_id] += 1

    def _learn(self, decision: Decision, x: np.ndarray, r: float) -> None:
        raise NotImplementedError

    # -- helpers --------------------------------------------------------
    def _check_context(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise InvalidArgumentError(f"context must have shape ({self.dim},), got {x.shape}")
        if float(x @ x) > (1.0 + NORM_TOLERANCE) ** 2:
            raise InvalidArgumentError("context norm exceeds 1")
        return x

    def _resolve_class(self, x: np.ndarray, class_id: Optional[int]) -> int:
        if class_id is None:
            if self.classifier is not None:
                class_id = self.classifier(x)
            elif self.n_classes == 1:
                class_id = 0
            else:
                raise InvalidArgumentError("class_id required when no classifier is attached")
        class_id = int(class_id)
        if not (0 <= class_id < self.n_classes):
            raise InvalidArgumentError(f"class_id {class_id} outside [0, {self.n_classes})")
        return class_id

    def _begin(self, x, class_id):
        if self.budget.remaining_time < 1:
            raise ContractViolationError("decide called after the horizon ended")
        x = self._check_context(x)
        return x, self._resolve_class(x, class_id)

    # -- persistence ----------------------------------------------------
    def to_state(self) -> dict:
        return {
            "kind": self.kind.value,
            "config": self.config.to_dict(),
            "n_arms": self.n_arms,
            "dim": self.dim,
            "n_classes": self.n_classes,
            "budget": {
                "total_budget": self.budget.total_budget,
                "horizon": self.budget.horizon,
                "remaining_budget": self.budget.remaining_budget,
                "remaining_time": self.budget.remaining_time,
            },
            "rng": self.rng.bit_generator.state,
            "executed_by_class": self.executed_by_class.tolist(),
            "seen_by_class": self.seen_by_class.tolist(),
            "learner": self._learner_state(),
        }

    def load_state(self, state: dict) -> None:
        for key in ("n_arms", "dim", "n_classes"):
            if int(state[key]) != getattr(self, key):
                raise InvalidArgumentError(f"{key} mismatch: snapshot {state[key]}, policy {getattr(self, key)}")
        config = PolicyConfig(**state["config"])
        if config.policy_kind is not self.kind:
            raise InvalidArgumentError(f"snapshot is for {config.policy_kind.value}, not {self.kind.value}")
        self.config = config
        self.budget = BudgetState(**state["budget"])
        self.rng.bit_generator.state = state["rng"]
        self.executed_by_class[...] = state["executed_by_class"]
        self.seen_by_class[...] = state["seen_by_class"]
        self._load_learner(state["learner"])

    def _learner_state(self) -> dict:
        return {}

    def _load_learner(self, state: dict) -> None:
        pass


class HatchPolicy(Policy):
    """Two-level policy: DRA retain gate over classes, per-(class, arm) LinUCB below."""

    kind = PolicyKind.HATCH

    def __init__(
        self,
        config: PolicyConfig,
        alloc: AllocationState,
        n_arms: int,
        budget: BudgetState,
        classifier: Optional[Callable[[np.ndarray], int]] = None,
    ) -> None:
        dim = alloc.centers.shape[1]
        super().__init__(config, n_arms, dim, budget, alloc.n_classes, classifier)
        self.alloc = alloc
        self.arms = [ArmModels(n_arms, dim, config.lam) for _ in range(alloc.n_classes)]

    def decide(self, x, class_id: Optional[int] = None) -> Decision:
        x, j = self._begin(x, class_id)
        cfg = self.config
        scores = self.arms[j].scores(x, cfg.delta, cfg.alpha_override)
        arm = int(np.argmax(scores))
        b = self.budget
        if b.remaining_budget > 0:
            p = dra_retain(self.alloc.phi, self.alloc.values(b.round_index), b.ratio, j)
            executed = bool(self.rng.random() < p)
        else:
            p, executed = 0.0, False
        return Decision(arm, j, p, executed, scores)

    def _learn(self, decision: Decision, x: np.ndarray, r: float) -> None:
        self.arms[decision.class_id][decision.arm].update(x, r)
        self.alloc.update_class_value(decision.class_id, r)

    def _learner_state(self) -> dict:
        a = self.alloc
        return {
            "centers": a.centers.tolist(),
            "phi": a.phi.tolist(),
            "alpha_tilde": a.alpha_tilde,
            "u_hat": a.u_hat.tolist(),
            "class_models": [m.to_state() for m in a.class_models],
            "arm_models": [bank.to_state() for bank in self.arms],
        }

    def _load_learner(self, state: dict) -> None:
        a = self.alloc
        if np.asarray(state["centers"]).shape != a.centers.shape:
            raise InvalidArgumentError("class centers shape mismatch")
        a.u_hat[...] = state["u_hat"]
        for m, s in zip(a.class_models, state["class_models"], strict=True):
            m.load_state(s)
        for bank, s in zip(self.arms, state["arm_models"], strict=True):
            bank.load_state(s)
        a.refresh()


class _GlobalLinUCB(Policy):
    """One ridge model per arm, blind to class structure."""

    def __init__(self, config, n_arms, dim, budget, n_classes=1, classifier=None) -> None:
        super().__init__(config, n_arms, dim, budget, n_classes, classifier)
        self.arms = ArmModels(n_arms, dim, config.lam)

    def decide(self, x, class_id: Optional[int] = None) -> Decision:
        x, j = self._begin(x, class_id)
        scores = self.arms.scores(x, self.config.delta, self.config.alpha_override)
        arm = int(np.argmax(scores))
        p, executed = self._gate()
        return Decision(arm, j, p, executed, scores)

    def _gate(self) -> tuple[float, bool]:
        raise NotImplementedError

    def _learn(self, decision: Decision, x: np.ndarray, r: float) -> None:
        self.arms[decision.arm].update(x, r)

    def _learner_state(self) -> dict:
        return {"arm_models": self.arms.to_state()}

    def _load_learner(self, state: dict) -> None:
        self.arms.load_state(state["arm_models"])


class GreedyLinUCB(_GlobalLinUCB):
    """Executes every round until the budget runs out."""

    kind = PolicyKind.GREEDY_LINUCB

    def _gate(self):
        if self.budget.remaining_budget > 0:
            return 1.0, True
        return 0.0, False


class RandomLinUCB(_GlobalLinUCB):
    """Executes with probability ``b / tau``."""

    kind = PolicyKind.RANDOM_LINUCB

    def _gate(self):
        b = self.budget
        if b.remaining_budget <= 0:
            return 0.0, False
        p = min(1.0, b.ratio)
        return p, bool(self.rng.random() < p)


class ClusterUCBALP(Policy):
    """Context-free UCB with adaptive LP allocation over class indices.

    Class values are empirical mean rewards plus ``sqrt(log t / (2 N_j))``
    (1 for unseen classes); arms within a class use the same bonus on their
    own counts, with unseen arms scored ``+inf``.
    """

    kind = PolicyKind.CLUSTER_UCB_ALP

    def __init__(self, config, phi, n_arms, dim, budget, classifier=None) -> None:
        phi = np.asarray(phi, dtype=float)
        super().__init__(config, n_arms, dim, budget, phi.size, classifier)
        self.phi = phi
        self.class_n = np.zeros(phi.size, dtype=np.int64)
        self.class_sum = np.zeros(phi.size)
        self.arm_n = np.zeros((phi.size, n_arms), dtype=np.int64)
        self.arm_sum = np.zeros((phi.size, n_arms))
        self._refresh_cache()

    def _refresh_cache(self) -> None:
        # unseen entries: mean 1 (classes) or +inf (arms) with no bonus
        with np.errstate(divide="ignore", invalid="ignore"):
            cn, an = self.class_n, self.arm_n
            self._class_mean = np.where(cn > 0, self.class_sum / np.maximum(cn, 1), 1.0)
            self._class_half_inv = np.where(cn > 0, 0.5 / np.maximum(cn, 1), 0.0)
            self._arm_mean = np.where(an > 0, self.arm_sum / np.maximum(an, 1), np.inf)
            self._arm_half_inv = np.where(an > 0, 0.5 / np.maximum(an, 1), 0.0)

    def class_values(self, t: int) -> np.ndarray:
        return self._class_mean + np.sqrt(math.log(max(t, 1)) * self._class_half_inv)

    def arm_scores(self, class_id: int, t: int) -> np.ndarray:
        return self._arm_mean[class_id] + np.sqrt(math.log(max(t, 1)) * self._arm_half_inv[class_id])

    def decide(self, x, class_id: Optional[int] = None) -> Decision:
        x, j = self._begin(x, class_id)
        b = self.budget
        t = b.round_index
        scores = self.arm_scores(j, t)
        arm = int(np.argmax(scores))
        if b.remaining_budget > 0:
            p = dra_retain(self.phi, self.class_values(t), b.ratio, j)
            executed = bool(self.rng.random() < p)
        else:
            p, executed = 0.0, False
        return Decision(arm, j, p, executed, scores)

    def _learn(self, decision: Decision, x: np.ndarray, r: float) -> None:
        j, a = decision.class_id, decision.arm
        self.class_n[j] += 1
        self.class_sum[j] += r
        self.arm_n[j, a] += 1
        self.arm_sum[j, a] += r
        self._class_mean[j] = self.class_sum[j] / self.class_n[j]
        self._class_half_inv[j] = 0.5 / self.class_n[j]
        self._arm_mean[j, a] = self.arm_sum[j, a] / self.arm_n[j, a]
        self._arm_half_inv[j, a] = 0.5 / self.arm_n[j, a]

    def _learner_state(self) -> dict:
        return {
            "phi": self.phi.tolist(),
            "class_n": self.class_n.tolist(),
            "class_sum": self.class_sum.tolist(),
            "arm_n": self.arm_n.tolist(),
            "arm_sum": self.arm_sum.tolist(),
        }

    def _load_learner(self, state: dict) -> None:
        for name in ("class_n", "class_sum", "arm_n", "arm_sum"):
            arr = np.asarray(state[name])
            target = getattr(self, name)
            if arr.shape != target.shape:
                raise InvalidArgumentError(f"{name} shape mismatch")
            target[...] = arr
        self._refresh_cache()


class UniformRandomPolicy(Policy):
    """Fixed reference policy: uniform arm, executed whenever budget remains."""

    kind = PolicyKind.UNIFORM_RANDOM

    def decide(self, x, class_id: Optional[int] = None) -> Decision:
        x, j = self._begin(x, class_id)
        arm = int(self.rng.integers(self.n_arms))
        executed = self.budget.remaining_budget > 0
        return Decision(arm, j, 1.0 if executed else 0.0, executed, None)

    def _learn(self, decision, x, r) -> None:
        pass


def make_policy(
    config: PolicyConfig,
    *,
    n_arms: int,
    budget: BudgetState,
    centers=None,
    phi=None,
    dim: Optional[int] = None,
    classifier: Optional[Callable[[np.ndarray], int]] = None,
) -> Policy:
    """Build the policy named by ``config.policy_kind``.

    ``centers`` (J x d) and ``phi`` describe the user classes; class-blind
    baselines only use their count for diagnostics.
    """
    if centers is not None:
        centers = np.asarray(centers, dtype=float)
        dim = centers.shape[1] if dim is None else dim
    if dim is None:
        raise InvalidArgumentError("dim or centers must be given")
    n_classes = 1 if phi is None else len(phi)
    kind = config.policy_kind
    if kind is PolicyKind.HATCH:
        if centers is None or phi is None:
            raise InvalidArgumentError("HATCH needs class centers and phi")
        alloc = make_allocation(
            centers,
            phi,
            delta=config.delta,
            alpha_tilde_mode=config.alpha_tilde_mode,
            alpha_override=config.alpha_override,
            optimistic=config.optimistic_allocation,
        )
        return HatchPolicy(config, alloc, n_arms, budget, classifier)
    if kind is PolicyKind.CLUSTER_UCB_ALP:
        if phi is None:
            raise InvalidArgumentError("cluster-UCB-ALP needs phi")
        return ClusterUCBALP(config, phi, n_arms, dim, budget, classifier)
    cls = {
        PolicyKind.GREEDY_LINUCB: GreedyLinUCB,
        PolicyKind.RANDOM_LINUCB: RandomLinUCB,
        PolicyKind.UNIFORM_RANDOM: UniformRandomPolicy,
    }[kind]
    return cls(config, n_arms, dim, budget, n_classes, classifier)


def with_seed(config: PolicyConfig, seed: int) -> PolicyConfig:
    return replace(config, seed=int(seed))
