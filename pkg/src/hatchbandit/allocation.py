"""Global resource allocation: class values, the DRA linear program, budget accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from .errors import BudgetViolationError, InvalidArgumentError
from .linear import RidgeModel

PHI_SUM_TOLERANCE = 1e-6


class AlphaTildeMode(str, Enum):
    CONSTANT = "constant"
    TIME_GROWING = "time_growing"


def default_alpha_tilde(delta: float) -> float:
    """Hoeffding-style class width ``sqrt(log(2/delta) / 2)``."""
    return math.sqrt(math.log(2.0 / delta) / 2.0)


@dataclass(frozen=True)
class ClassProfile:
    class_id: int
    center: np.ndarray
    phi: float


@dataclass
class DraSolution:
    p: np.ndarray
    threshold_index: int
    objective: float


def solve_dra(phi, u, rho: float) -> DraSolution:
    """Closed-form optimum of ``max sum p_j phi_j u_j  s.t.  sum p_j phi_j <= rho``.

    Classes are ranked by ``u`` descending, ties broken by ascending index.
    The leading classes whose cumulative mass fits under ``rho`` are retained
    with probability one, the next class receives the leftover mass as a
    fractional probability, and the rest are skipped.  ``rho >= 1`` retains
    everything.
    """
    phi = np.asarray(phi, dtype=float)
    u = np.asarray(u, dtype=float)
    if phi.ndim != 1 or phi.shape != u.shape or phi.size == 0:
        raise InvalidArgumentError("phi and u must be non-empty vectors of equal length")
    if np.any(phi < 0) or not np.all(np.isfinite(phi)):
        raise InvalidArgumentError("phi entries must be non-negative")
    if abs(phi.sum() - 1.0) > PHI_SUM_TOLERANCE:
        raise InvalidArgumentError(f"phi must sum to 1, got {phi.sum()!r}")
    if not np.all(np.isfinite(u)):
        raise InvalidArgumentError("u must be finite")
    if not (rho >= 0.0):
        raise InvalidArgumentError(f"rho must be non-negative, got {rho!r}")

    n = phi.size
    if rho >= 1.0:
        p = np.ones(n)
        return DraSolution(p=p, threshold_index=n, objective=float(np.sum(phi * u)))

    order = np.lexsort((np.arange(n), -u))
    cum = np.cumsum(phi[order])
    j_tilde = int(np.searchsorted(cum, rho, side="right"))
    p_sorted = np.zeros(n)
    p_sorted[:j_tilde] = 1.0
    if j_tilde < n:
        residual = rho - (cum[j_tilde - 1] if j_tilde > 0 else 0.0)
        if residual > 0.0:
            p_sorted[j_tilde] = min(1.0, residual / phi[order[j_tilde]])
    p = np.empty(n)
    p[order] = p_sorted
    return DraSolution(p=p, threshold_index=j_tilde, objective=float(np.sum(p * phi * u)))


def dra_retain(phi: np.ndarray, u: np.ndarray, rho: float, class_id: int) -> float:
    """``solve_dra(phi, u, rho).p[class_id]`` without the sort or input checks.

    The mass ranked ahead of ``class_id`` (higher value, or equal value and a
    lower id) is spent first; the class gets whatever is left, capped at 1.
    Inputs are trusted, so this is for per-round use on validated state.
    """
    if rho >= 1.0:
        return 1.0
    uj = u[class_id]
    ahead = u > uj
    ahead[:class_id] |= u[:class_id] == uj
    residual = rho - float(phi[ahead].sum())
    if residual <= 0.0:
        return 0.0
    return min(1.0, residual / float(phi[class_id]))


@dataclass
class BudgetState:
    """Remaining resource ``b`` and remaining rounds ``tau``."""

    total_budget: int
    horizon: int
    remaining_budget: int = -1
    remaining_time: int = -1

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise InvalidArgumentError(f"horizon must be positive, got {self.horizon}")
        if self.total_budget < 0:
            raise InvalidArgumentError(f"budget must be non-negative, got {self.total_budget}")
        if self.remaining_budget < 0:
            self.remaining_budget = self.total_budget
        if self.remaining_time < 0:
            self.remaining_time = self.horizon
        if self.remaining_budget > self.total_budget or self.remaining_time > self.horizon:
            raise InvalidArgumentError("remaining budget/time exceed their totals")

    @classmethod
    def from_ratio(cls, rho: float, horizon: int) -> "BudgetState":
        return cls(total_budget=int(math.floor(rho * horizon)), horizon=horizon)

    @property
    def ratio(self) -> float:
        """Adaptive budget ratio ``b / tau``."""
        return self.remaining_budget / self.remaining_time

    @property
    def round_index(self) -> int:
        """1-based index of the current round."""
        return self.horizon - self.remaining_time + 1

    def step(self, executed: bool) -> "BudgetState":
        if self.remaining_time < 1:
            raise InvalidArgumentError("horizon already exhausted")
        if executed:
            if self.remaining_budget <= 0:
                raise BudgetViolationError("executed an action with zero remaining budget")
            self.remaining_budget -= 1
        self.remaining_time -= 1
        return self


def step_budget(budget: BudgetState, executed: bool) -> BudgetState:
    return budget.step(executed)


@dataclass
class AllocationState:
    """Per-class ridge estimators evaluated at the class centers.

    ``u_hat[j]`` is the plain estimate ``center_j^T theta_j`` (1 before the
    first update).  :meth:`values` is what the DRA ranks: with ``optimistic``
    set, updated classes get an upper-confidence bonus
    ``(1 + alpha_tilde) * ||center_j||_{A_j^{-1}}``.
    """

    profiles: List[ClassProfile]
    alpha_tilde: float
    alpha_tilde_mode: AlphaTildeMode = AlphaTildeMode.CONSTANT
    alpha_override: Optional[float] = None
    optimistic: bool = True
    class_models: List[RidgeModel] = field(default_factory=list)
    u_hat: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if not self.profiles:
            raise InvalidArgumentError("at least one class profile is required")
        for j, prof in enumerate(self.profiles):
            if prof.class_id != j:
                raise InvalidArgumentError("profiles must be ordered by class_id 0..J-1")
        dim = len(self.profiles[0].center)
        if not self.class_models:
            self.class_models = [RidgeModel(dim, 1.0) for _ in self.profiles]
        if self.u_hat is None:
            self.u_hat = np.ones(len(self.profiles))
        self.phi = np.array([p.phi for p in self.profiles], dtype=float)
        self.centers = np.array([p.center for p in self.profiles], dtype=float)
        self.refresh()

    def refresh(self) -> None:
        """Recompute cached per-class widths from the class models."""
        self._updated = np.array([m.n_obs > 0 for m in self.class_models])
        self._width = np.array([m.width(c) for m, c in zip(self.class_models, self.centers)])

    @property
    def n_classes(self) -> int:
        return len(self.profiles)

    def width_multiplier(self, t: int) -> float:
        if self.alpha_override is not None:
            return self.alpha_override
        if self.alpha_tilde_mode is AlphaTildeMode.TIME_GROWING:
            return math.sqrt(math.log(max(t, 1)) / 2.0)
        return 1.0 + self.alpha_tilde

    def values(self, t: int = 1) -> np.ndarray:
        if not self.optimistic:
            return self.u_hat.copy()
        bonus = self.width_multiplier(t) * self._width
        return np.where(self._updated, self.u_hat + bonus, self.u_hat)

    def update_class_value(self, class_id: int, r: float) -> "AllocationState":
        self._check_class(class_id)
        model = self.class_models[class_id]
        center = self.centers[class_id]
        model.update(center, r)
        self.u_hat[class_id] = float(center @ model.theta)
        self._updated[class_id] = True
        self._width[class_id] = model.width(center)
        return self

    def _check_class(self, class_id: int) -> None:
        if not (0 <= class_id < self.n_classes):
            raise InvalidArgumentError(f"unknown class_id {class_id}")


def make_allocation(
    centers,
    phi,
    delta: float = 0.1,
    alpha_tilde: Optional[float] = None,
    **kwargs,
) -> AllocationState:
    centers = np.asarray(centers, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if centers.ndim != 2 or centers.shape[0] != phi.size:
        raise InvalidArgumentError("centers must be a (J, d) array matching phi")
    profiles = [ClassProfile(j, centers[j].copy(), float(phi[j])) for j in range(phi.size)]
    if alpha_tilde is None:
        alpha_tilde = default_alpha_tilde(delta)
    return AllocationState(profiles=profiles, alpha_tilde=alpha_tilde, **kwargs)


def retain_probability(alloc: AllocationState, budget: BudgetState, class_id: int) -> float:
    alloc._check_class(class_id)
    return dra_retain(alloc.phi, alloc.values(budget.round_index), budget.ratio, class_id)


def update_class_value(alloc: AllocationState, class_id: int, r: float) -> AllocationState:
    return alloc.update_class_value(class_id, r)
