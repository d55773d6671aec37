"""Policy snapshots: a versioned JSON document holding the full learner state.

Floats go through ``json`` with their shortest round-tripping repr, so a
restored policy reproduces the original's decisions bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from ..allocation import BudgetState
from ..errors import InvalidArgumentError, SnapshotFormatError
from ..policy import Policy, PolicyConfig, PolicyKind, make_policy

SNAPSHOT_FORMAT = "hatchbandit.policy_snapshot"
SNAPSHOT_VERSION = 1


def snapshot(policy: Policy, path: Union[str, Path]) -> None:
    doc = {"format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION, "state": policy.to_state()}
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def _read(path: Union[str, Path]) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(f"{path}: not valid JSON") from exc
    if not isinstance(doc, dict) or doc.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotFormatError(f"{path}: not a policy snapshot")
    if doc.get("version") != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"{path}: unsupported snapshot version {doc.get('version')!r}")
    if not isinstance(doc.get("state"), dict):
        raise SnapshotFormatError(f"{path}: snapshot has no state")
    return doc["state"]


def restore_into(policy: Policy, path: Union[str, Path]) -> Policy:
    """Load a snapshot into an existing policy of matching kind and shape."""
    state = _read(path)
    if state.get("kind") != policy.kind.value:
        raise SnapshotFormatError(f"snapshot holds a {state.get('kind')!r} policy, not {policy.kind.value!r}")
    try:
        policy.load_state(state)
    except (KeyError, TypeError, ValueError) as exc:
        # InvalidArgumentError is a ValueError: shape and dimension mismatches land here
        raise SnapshotFormatError(f"{path}: incompatible snapshot: {exc}") from exc
    return policy


def restore(
    path: Union[str, Path],
    classifier: Optional[Callable[[np.ndarray], int]] = None,
) -> Policy:
    """Rebuild a policy from a snapshot alone.

    The classifier is not serialized; pass it again if the policy should
    resolve classes from contexts.
    """
    state = _read(path)
    try:
        config = PolicyConfig(**state["config"])
        learner = state["learner"]
        budget = BudgetState(**state["budget"])
        kind = PolicyKind(state["kind"])
        phi = learner.get("phi") if kind in (PolicyKind.HATCH, PolicyKind.CLUSTER_UCB_ALP) else None
        if phi is None and int(state["n_classes"]) > 1:
            phi = np.full(int(state["n_classes"]), 1.0 / int(state["n_classes"]))
        policy = make_policy(
            config,
            n_arms=int(state["n_arms"]),
            budget=budget,
            centers=learner.get("centers"),
            phi=phi,
            dim=int(state["dim"]),
            classifier=classifier,
        )
        policy.load_state(state)
    except (KeyError, TypeError, ValueError, InvalidArgumentError) as exc:
        raise SnapshotFormatError(f"{path}: corrupt snapshot: {exc}") from exc
    return policy
