"""Context-to-class mapping: Gaussian mixture or k-means over historical contexts.

Fitting is delegated to scikit-learn; class assignment is computed here from
the stored parameters so a persisted model assigns identically without it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from ..errors import InvalidArgumentError, SnapshotFormatError

CLUSTER_FORMAT = "hatchbandit.cluster_model"
CLUSTER_VERSION = 1


class ClusterMethod(str, Enum):
    GAUSSIAN_MIXTURE = "gaussian_mixture"
    KMEANS = "kmeans"


@dataclass
class ClusterModel:
    method: ClusterMethod
    means: np.ndarray  # (J, d)
    phi: np.ndarray  # (J,)
    centers: np.ndarray  # (J, d), norm <= 1
    covariances: Optional[np.ndarray] = None  # (J, d, d), mixture only
    weights: Optional[np.ndarray] = None  # (J,), mixture only

    def __post_init__(self) -> None:
        self.method = ClusterMethod(self.method)
        self.means = np.asarray(self.means, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.centers = np.asarray(self.centers, dtype=float)
        J, d = self.means.shape
        if self.phi.shape != (J,) or self.centers.shape != (J, d):
            raise InvalidArgumentError("cluster model arrays have inconsistent shapes")
        if self.method is ClusterMethod.GAUSSIAN_MIXTURE:
            if self.covariances is None or self.weights is None:
                raise InvalidArgumentError("a mixture model needs covariances and weights")
            self.covariances = np.asarray(self.covariances, dtype=float)
            self.weights = np.asarray(self.weights, dtype=float)
            if self.covariances.shape != (J, d, d) or self.weights.shape != (J,):
                raise InvalidArgumentError("mixture parameters have inconsistent shapes")
            chol = np.linalg.cholesky(self.covariances)
            # log N(x | mu, Sigma) = const_j - 0.5 * ||L_j^{-1}(x - mu_j)||^2
            self._chol_inv = np.linalg.inv(chol)
            self._log_norm = (
                np.log(self.weights)
                - np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
                - 0.5 * d * math.log(2.0 * math.pi)
            )

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_joint(self, X) -> np.ndarray:
        """``log(weight_j) + log N(x | mean_j, cov_j)`` for each row of ``X``; shape (n, J)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        diff = X[:, None, :] - self.means[None, :, :]
        z = np.einsum("jkd,njd->njk", self._chol_inv, diff)
        return self._log_norm[None, :] - 0.5 * np.einsum("njk,njk->nj", z, z)

    def responsibilities(self, X) -> np.ndarray:
        lj = self.log_joint(X)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def assign_classes(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise InvalidArgumentError(f"contexts must have {self.dim} columns")
        if self.method is ClusterMethod.GAUSSIAN_MIXTURE:
            score = self.log_joint(X)
            return np.argmax(score, axis=1)
        d2 = ((X[:, None, :] - self.means[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)

    def assign_class(self, x) -> int:
        """Class of one context; ties go to the lowest class id."""
        return int(self.assign_classes(np.asarray(x, dtype=float)[None, :])[0])

    __call__ = assign_class

    def to_state(self) -> dict:
        state = {
            "format": CLUSTER_FORMAT,
            "version": CLUSTER_VERSION,
            "method": self.method.value,
            "means": self.means.tolist(),
            "phi": self.phi.tolist(),
            "centers": self.centers.tolist(),
        }
        if self.method is ClusterMethod.GAUSSIAN_MIXTURE:
            state["covariances"] = self.covariances.tolist()
            state["weights"] = self.weights.tolist()
        return state

    @classmethod
    def from_state(cls, state: dict) -> "ClusterModel":
        if not isinstance(state, dict) or state.get("format") != CLUSTER_FORMAT:
            raise SnapshotFormatError("not a cluster model snapshot")
        if state.get("version") != CLUSTER_VERSION:
            raise SnapshotFormatError(f"unsupported cluster model version {state.get('version')!r}")
        try:
            return cls(
                method=state["method"],
                means=state["means"],
                phi=state["phi"],
                centers=state["centers"],
                covariances=state.get("covariances"),
                weights=state.get("weights"),
            )
        except (KeyError, ValueError, InvalidArgumentError, np.linalg.LinAlgError) as exc:
            raise SnapshotFormatError(f"corrupt cluster model: {exc}") from exc

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_state(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ClusterModel":
        try:
            state = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SnapshotFormatError(f"{path}: not valid JSON") from exc
        return cls.from_state(state)


def _unit_ball(centers: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    return centers / np.maximum(norms, 1.0)


def fit_clusters(
    contexts,
    n_classes: int,
    method: Union[ClusterMethod, str] = ClusterMethod.GAUSSIAN_MIXTURE,
    seed: int = 0,
    n_init: int = 3,
) -> ClusterModel:
    """Fit a ``n_classes``-way mapping; ``phi`` is the assignment frequency on ``contexts``."""
    from sklearn.cluster import KMeans
    from sklearn.mixture import GaussianMixture

    X = np.asarray(contexts, dtype=float)
    method = ClusterMethod(method)
    if X.ndim != 2:
        raise InvalidArgumentError("contexts must be a 2-D array")
    if n_classes < 1:
        raise InvalidArgumentError("n_classes must be positive")
    if np.unique(X, axis=0).shape[0] < n_classes:
        raise InvalidArgumentError(f"need at least {n_classes} distinct contexts")

    if method is ClusterMethod.GAUSSIAN_MIXTURE:
        gm = GaussianMixture(
            n_components=n_classes,
            covariance_type="full",
            tol=1e-6,
            max_iter=200,
            n_init=n_init,
            init_params="kmeans",
            random_state=seed,
        ).fit(X)
        model = ClusterModel(
            method=method,
            means=gm.means_,
            phi=np.full(n_classes, 1.0 / n_classes),
            centers=_unit_ball(gm.means_),
            covariances=gm.covariances_,
            weights=gm.weights_,
        )
    else:
        km = KMeans(n_clusters=n_classes, n_init=n_init, random_state=seed).fit(X)
        means = km.cluster_centers_
        model = ClusterModel(method=method, means=means, phi=np.full(n_classes, 1.0 / n_classes), centers=_unit_ball(means))
    labels = model.assign_classes(X)
    model.phi = np.bincount(labels, minlength=n_classes) / X.shape[0]
    return model


def assign_class(model: ClusterModel, x) -> int:
    return model.assign_class(x)
