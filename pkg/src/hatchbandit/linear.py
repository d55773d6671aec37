"""Incremental ridge regression with UCB confidence widths.

A :class:`RidgeModel` keeps ``A = lambda*I + X^T X`` together with its inverse,
updated by the Sherman-Morrison formula, so that every update, prediction and
width evaluation costs O(d^2).  :class:`ArmModels` stacks ``K`` such models in
contiguous buffers to score all arms with a handful of vectorized calls.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError

NORM_TOLERANCE = 1e-9
REFACTOR_EVERY = 1000


def _as_vector(x, dim: int) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (dim,):
        raise InvalidArgumentError(f"expected a vector of length {dim}, got shape {v.shape}")
    return v


def exploration_alpha(log_det_ratio, delta: float):
    """Self-normalized confidence radius ``sqrt(2 log(1/delta) + log det(A)/det(lambda I))``."""
    return np.sqrt(2.0 * math.log(1.0 / delta) + log_det_ratio)


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < 1.0):
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")


class RidgeModel:
    """Ridge regression state for one (class, arm) pair or one user class.

    Parameters
    ----------
    dim : int
        Feature dimension ``d``.
    lam : float
        Regularization weight; the Gram matrix starts at ``lam * I``.

    The array attributes may be views into buffers owned by an
    :class:`ArmModels` bank; all updates are written in place.
    """

    __slots__ = ("dim", "lam", "gram", "gram_inv", "moment", "theta", "n_obs", "log_det_ratio")

    def __init__(self, dim: int, lam: float = 1.0, *, _buffers: Optional[tuple] = None) -> None:
        if not isinstance(dim, (int, np.integer)) or isinstance(dim, bool) or dim < 1:
            raise InvalidArgumentError(f"dim must be a positive integer, got {dim!r}")
        if not (lam > 0.0) or not math.isfinite(lam):
            raise InvalidArgumentError(f"lambda must be positive and finite, got {lam!r}")
        self.dim = int(dim)
        self.lam = float(lam)
        if _buffers is None:
            _buffers = (
                np.empty((dim, dim)),
                np.empty((dim, dim)),
                np.empty(dim),
                np.empty(dim),
            )
        self.gram, self.gram_inv, self.moment, self.theta = _buffers
        self.reset()

    def reset(self) -> None:
        eye = np.eye(self.dim)
        self.gram[...] = self.lam * eye
        self.gram_inv[...] = eye / self.lam
        self.moment[...] = 0.0
        self.theta[...] = 0.0
        self.n_obs = 0
        self.log_det_ratio = 0.0

    def update(self, x, r: float) -> "RidgeModel":
        """Add one observation ``(x, r)``; returns ``self`` for chaining."""
        x = _as_vector(x, self.dim)
        sq = float(x @ x)
        if not (sq <= (1.0 + NORM_TOLERANCE) ** 2):
            raise InvalidArgumentError(f"context norm {math.sqrt(sq):.12g} exceeds 1")
        r = float(r)
        if not math.isfinite(r):
            raise InvalidArgumentError(f"reward must be finite, got {r}")

        ax = self.gram_inv @ x
        q = float(x @ ax)
        self.gram_inv -= ax[:, None] * (ax / (1.0 + q))
        self.gram += x[:, None] * x
        self.moment += r * x
        self.n_obs += 1
        self.log_det_ratio += math.log1p(q)
        if self.n_obs % REFACTOR_EVERY == 0:
            self.refactor()
        self.theta[...] = self.gram_inv @ self.moment
        return self

    def refactor(self) -> None:
        """Recompute the inverse from the Gram matrix to cap accumulated drift."""
        inv = np.linalg.inv(self.gram)
        self.gram_inv[...] = 0.5 * (inv + inv.T)

    def predict(self, x) -> float:
        x = _as_vector(x, self.dim)
        return float(x @ self.theta)

    def width(self, x) -> float:
        """Confidence width ``||x||_{A^{-1}}``."""
        x = _as_vector(x, self.dim)
        return math.sqrt(max(float(x @ self.gram_inv @ x), 0.0))

    def alpha(self, delta: float) -> float:
        _check_delta(delta)
        return float(exploration_alpha(self.log_det_ratio, delta))

    def ucb_score(self, x, delta: float, alpha_override: Optional[float] = None) -> float:
        """Optimistic reward estimate ``x^T theta + (sqrt(lam) + alpha) ||x||_{A^{-1}}``.

        With ``alpha_override`` the exploration term is ``alpha_override * width``.
        """
        _check_delta(delta)
        mult = _multiplier(self.lam, self.log_det_ratio, delta, alpha_override)
        return self.predict(x) + mult * self.width(x)

    def dense_theta(self) -> np.ndarray:
        """Direct solve of ``A theta = X^T y``; independent of the cached inverse."""
        return np.linalg.solve(self.gram, self.moment)

    def exact_log_det_ratio(self) -> float:
        sign, logdet = np.linalg.slogdet(self.gram)
        return float(logdet - self.dim * math.log(self.lam))

    def to_state(self) -> dict:
        return {
            "dim": self.dim,
            "lambda": self.lam,
            "gram": self.gram.tolist(),
            "gram_inv": self.gram_inv.tolist(),
            "moment": self.moment.tolist(),
            "theta": self.theta.tolist(),
            "n_obs": self.n_obs,
            "log_det_ratio": self.log_det_ratio,
        }

    def load_state(self, state: dict) -> None:
        d = self.dim
        if int(state["dim"]) != d:
            raise InvalidArgumentError(f"state has dim {state['dim']}, model has {d}")
        for name, shape in (("gram", (d, d)), ("gram_inv", (d, d)), ("moment", (d,)), ("theta", (d,))):
            arr = np.asarray(state[name], dtype=float)
            if arr.shape != shape:
                raise InvalidArgumentError(f"{name} has shape {arr.shape}, expected {shape}")
            getattr(self, name)[...] = arr
        self.lam = float(state["lambda"])
        self.n_obs = int(state["n_obs"])
        self.log_det_ratio = float(state["log_det_ratio"])

    def __repr__(self) -> str:
        return f"RidgeModel(dim={self.dim}, lam={self.lam}, n_obs={self.n_obs})"


def _multiplier(lam, log_det_ratio, delta, alpha_override):
    if alpha_override is not None:
        return alpha_override
    return math.sqrt(lam) + exploration_alpha(log_det_ratio, delta)


def new_ridge(dim: int, lam: float = 1.0) -> RidgeModel:
    return RidgeModel(dim, lam)


class ArmModels:
    """``K`` independent ridge models sharing stacked storage.

    ``bank[a]`` is an ordinary :class:`RidgeModel` whose arrays are views into
    the stacked buffers, so updates through it are visible to :meth:`scores`.
    """

    def __init__(self, n_arms: int, dim: int, lam: float = 1.0) -> None:
        if n_arms < 1:
            raise InvalidArgumentError(f"n_arms must be positive, got {n_arms}")
        self.n_arms = int(n_arms)
        self.dim = int(dim)
        self.lam = float(lam)
        self.gram = np.empty((n_arms, dim, dim))
        self.gram_inv = np.empty((n_arms, dim, dim))
        self.moment = np.empty((n_arms, dim))
        self.theta = np.empty((n_arms, dim))
        self.models = [
            RidgeModel(dim, lam, _buffers=(self.gram[a], self.gram_inv[a], self.moment[a], self.theta[a]))
            for a in range(n_arms)
        ]

    def __getitem__(self, arm: int) -> RidgeModel:
        return self.models[arm]

    def __len__(self) -> int:
        return self.n_arms

    def scores(self, x: np.ndarray, delta: float, alpha_override: Optional[float] = None) -> np.ndarray:
        """UCB score of every arm at ``x`` (same formula as :meth:`RidgeModel.ucb_score`)."""
        pred = self.theta @ x
        w2 = (self.gram_inv @ x) @ x
        width = np.sqrt(np.maximum(w2, 0.0))
        if alpha_override is not None:
            return pred + alpha_override * width
        logdet = np.fromiter((m.log_det_ratio for m in self.models), dtype=float, count=self.n_arms)
        return pred + (math.sqrt(self.lam) + exploration_alpha(logdet, delta)) * width

    def to_state(self) -> list:
        return [m.to_state() for m in self.models]

    def load_state(self, states: Sequence[dict]) -> None:
        if len(states) != self.n_arms:
            raise InvalidArgumentError(f"expected {self.n_arms} arm states, got {len(states)}")
        for m, s in zip(self.models, states):
            m.load_state(s)
