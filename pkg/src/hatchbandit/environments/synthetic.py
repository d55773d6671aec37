"""Synthetic budgeted contextual-bandit world with per-class context pools.

Class ``j`` has a base value ``u_j``; arm ``a`` in that class adds an offset
``sigma[j, a]`` and a linear context effect ``x . w[j, a]``.  A round's raw
payoff is Gaussian around ``u_j + sigma[j, a] + x . w[j, a]`` with unit
variance and is thresholded at ``reward_threshold`` to a 0/1 click, so the
expected click probability is ``Phi(mean - reward_threshold)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import ndtr

from ..errors import InvalidArgumentError
from .events import EventLog

PAPER_PHI = (0.025, 0.05, 0.075, 0.15, 0.2, 0.2, 0.15, 0.075, 0.05, 0.025)


@dataclass
class SyntheticConfig:
    dim: int = 5
    n_classes: int = 10
    n_arms: int = 10
    phi: List[float] = field(default_factory=lambda: list(PAPER_PHI))
    n_contexts: int = 30000
    seed: int = 0
    # Generator shape knobs; the defaults are documented in the README.
    arm_offset_scale: float = 0.5
    context_spread: Optional[float] = 0.15
    reward_threshold: float = 0.5
    bias_feature: bool = False

    def __post_init__(self) -> None:
        phi = np.asarray(self.phi, dtype=float)
        if min(self.dim, self.n_classes, self.n_arms, self.n_contexts) < 1:
            raise InvalidArgumentError("dim, n_classes, n_arms and n_contexts must be positive")
        if self.n_contexts < self.n_classes:
            raise InvalidArgumentError("need at least one context per class")
        if phi.shape != (self.n_classes,):
            raise InvalidArgumentError(f"phi must have {self.n_classes} entries")
        if np.any(phi < 0) or abs(phi.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError("phi must be a probability distribution")
        if self.arm_offset_scale < 0 or (self.context_spread is not None and self.context_spread < 0):
            raise InvalidArgumentError("generator scales must be non-negative")
        self.phi = [float(p) for p in phi]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SyntheticWorld:
    config: SyntheticConfig
    u: np.ndarray  # (J,)
    sigma: np.ndarray  # (J, K)
    w: np.ndarray  # (J, K, d)
    contexts: np.ndarray  # (n_contexts, d)
    labels: np.ndarray  # (n_contexts,)

    def __post_init__(self) -> None:
        self.phi = np.asarray(self.config.phi, dtype=float)
        self._cum_phi = np.cumsum(self.phi)
        self._cum_phi[-1] = 1.0
        self.pools = [np.flatnonzero(self.labels == j) for j in range(self.n_classes)]
        if any(len(p) == 0 for p in self.pools):
            raise InvalidArgumentError("every class needs at least one pooled context")

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def n_classes(self) -> int:
        return self.config.n_classes

    @property
    def n_arms(self) -> int:
        return self.config.n_arms

    def class_centers(self) -> np.ndarray:
        """Mean pooled context per class (norm <= 1 since every context is)."""
        return np.array([self.contexts[p].mean(axis=0) for p in self.pools])

    # -- oracle ---------------------------------------------------------
    def mean_reward_param(self, x, class_id: int) -> np.ndarray:
        """Pre-threshold Gaussian mean for every arm at ``x``."""
        return self.u[class_id] + self.sigma[class_id] + self.w[class_id] @ np.asarray(x, dtype=float)

    def expected_rewards(self, x, class_id: int) -> np.ndarray:
        """Click probability of every arm at ``x``."""
        return ndtr(self.mean_reward_param(x, class_id) - self.config.reward_threshold)

    def best_expected_reward(self, x, class_id: int) -> float:
        return float(self.expected_rewards(x, class_id).max())

    def class_values(self) -> np.ndarray:
        """Average over each class pool of the best arm's click probability."""
        out = np.empty(self.n_classes)
        for j, idx in enumerate(self.pools):
            mean = self.u[j] + self.sigma[j][None, :] + self.contexts[idx] @ self.w[j].T
            out[j] = ndtr(mean - self.config.reward_threshold).max(axis=1).mean()
        return out

    # -- sampling -------------------------------------------------------
    def sample_class(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self._cum_phi, rng.random(), side="right"))

    def sample_context(self, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        j = self.sample_class(rng)
        pool = self.pools[j]
        return j, self.contexts[pool[rng.integers(len(pool))]]

    def reward_from_noise(self, x, class_id: int, arm: int, noise: float) -> int:
        """Threshold ``mean + noise`` where ``noise`` is a standard normal draw."""
        mean = self.u[class_id] + self.sigma[class_id, arm] + float(self.w[class_id, arm] @ x)
        return int(mean + noise >= self.config.reward_threshold)

    def sample_reward(self, x, class_id: int, arm: int, rng: np.random.Generator) -> int:
        return self.reward_from_noise(x, class_id, arm, rng.standard_normal())

    def sample_stream(self, n: int, rng: np.random.Generator):
        """Draw ``n`` rounds at once: class ids, contexts and reward noise."""
        cls = np.searchsorted(self._cum_phi, rng.random(n), side="right")
        pick = rng.random(n)
        sizes = np.array([len(p) for p in self.pools])
        starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
        offsets = np.minimum((pick * sizes[cls]).astype(np.int64), sizes[cls] - 1)
        idx = np.concatenate(self.pools)[starts[cls] + offsets]
        noise = rng.standard_normal(n)
        return cls, self.contexts[idx], noise

    def sample_log(self, n_events: int, seed: int) -> EventLog:
        """Events served by a uniform-random logging policy."""
        rng = np.random.default_rng(seed)
        cls = np.searchsorted(self._cum_phi, rng.random(n_events), side="right")
        xs = np.empty((n_events, self.dim))
        for j, pool in enumerate(self.pools):
            mask = cls == j
            xs[mask] = self.contexts[pool[rng.integers(len(pool), size=int(mask.sum()))]]
        arms = rng.integers(self.n_arms, size=n_events)
        mean = self.u[cls] + self.sigma[cls, arms] + np.einsum("nd,nd->n", self.w[cls, arms], xs)
        clicks = (mean + rng.standard_normal(n_events) >= self.config.reward_threshold).astype(int)
        return EventLog(xs, arms, clicks, class_id=cls, n_arms=self.n_arms)


def generate_synthetic(cfg: SyntheticConfig) -> SyntheticWorld:
    """Build a world deterministically from ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    J, K, d = cfg.n_classes, cfg.n_arms, cfg.dim
    u = rng.uniform(0.0, 1.0, J)
    sigma = rng.uniform(-cfg.arm_offset_scale, cfg.arm_offset_scale, (J, K))
    w = rng.uniform(0.0, 1.0, (J, K, d))
    w /= np.maximum(np.linalg.norm(w, axis=2, keepdims=True), 1.0)
    prototypes = rng.uniform(0.0, 1.0, (J, d))

    cum = np.cumsum(cfg.phi)
    cum[-1] = 1.0
    labels = np.searchsorted(cum, rng.random(cfg.n_contexts), side="right")
    if np.setdiff1d(np.arange(J), labels).size:
        # every class must own at least one context
        labels[:J] = np.arange(J)
    if cfg.context_spread is None:
        raw = rng.uniform(0.0, 1.0, (cfg.n_contexts, d))
    else:
        raw = prototypes[labels] + cfg.context_spread * rng.standard_normal((cfg.n_contexts, d))
    if cfg.bias_feature:
        raw[:, 0] = 1.0
    contexts = np.clip(raw, 0.0, 1.0) / np.sqrt(d)
    return SyntheticWorld(config=cfg, u=u, sigma=sigma, w=w, contexts=contexts, labels=labels)
