"""Logged interactions and the line-delimited event-log file format.

File layout (UTF-8 text, one JSON object per line)::

    {"format": "hatchbandit.events", "version": 1, "dim": 5, "n_arms": 10}
    {"t": 0, "x": [0.12, ...], "a": 3, "r": 1, "class_id": 4}
    ...

``class_id`` is optional per record.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np

from ..errors import InvalidArgumentError, SnapshotFormatError

logger = logging.getLogger(__name__)

LOG_FORMAT = "hatchbandit.events"
LOG_VERSION = 1


@dataclass(frozen=True)
class Event:
    t: int
    x: np.ndarray
    a: int
    r: int
    class_id: Optional[int] = None


class EventLog:
    """Columnar store of events: ``x`` is (n, d); ``a``, ``r``, ``t`` are (n,)."""

    def __init__(self, x, a, r, t=None, class_id=None, n_arms: Optional[int] = None) -> None:
        self.x = np.asarray(x, dtype=float)
        self.a = np.asarray(a, dtype=np.int64)
        self.r = np.asarray(r, dtype=np.int64)
        n = self.a.shape[0]
        self.t = np.arange(n, dtype=np.int64) if t is None else np.asarray(t, dtype=np.int64)
        self.class_id = None if class_id is None else np.asarray(class_id, dtype=np.int64)
        if self.x.ndim != 2 or self.x.shape[0] != n or self.r.shape != (n,) or self.t.shape != (n,):
            raise InvalidArgumentError("event columns have inconsistent lengths")
        if self.class_id is not None and self.class_id.shape != (n,):
            raise InvalidArgumentError("class_id column has the wrong length")
        if np.any((self.r != 0) & (self.r != 1)):
            raise InvalidArgumentError("rewards must be 0 or 1")
        if np.any(self.a < 0):
            raise InvalidArgumentError("arm indices must be non-negative")
        self.n_arms = int(self.a.max()) + 1 if n_arms is None and n else int(n_arms or 0)
        if n and self.a.max() >= self.n_arms:
            raise InvalidArgumentError(f"arm index {self.a.max()} outside [0, {self.n_arms})")

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.a.shape[0]

    def __getitem__(self, i: int) -> Event:
        cid = None if self.class_id is None else int(self.class_id[i])
        return Event(int(self.t[i]), self.x[i], int(self.a[i]), int(self.r[i]), cid)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def subset(self, idx) -> "EventLog":
        cid = None if self.class_id is None else self.class_id[idx]
        return EventLog(self.x[idx], self.a[idx], self.r[idx], self.t[idx], cid, self.n_arms)

    def normalized(self) -> "EventLog":
        """Scale all contexts by the largest norm if any exceeds 1."""
        norms = np.linalg.norm(self.x, axis=1)
        peak = float(norms.max()) if len(self) else 0.0
        if peak <= 1.0 + 1e-9:
            return self
        logger.warning("event log contexts exceed unit norm (max %.6g); rescaling by max norm", peak)
        return EventLog(self.x / peak, self.a, self.r, self.t, self.class_id, self.n_arms)


def write_event_log(log: EventLog, path: Union[str, Path]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {"format": LOG_FORMAT, "version": LOG_VERSION, "dim": log.dim, "n_arms": log.n_arms}
        fh.write(json.dumps(header) + "\n")
        for i in range(len(log)):
            rec = {"t": int(log.t[i]), "x": [float(v) for v in log.x[i]], "a": int(log.a[i]), "r": int(log.r[i])}
            if log.class_id is not None:
                rec["class_id"] = int(log.class_id[i])
            fh.write(json.dumps(rec) + "\n")


def read_event_log(path: Union[str, Path]) -> EventLog:
    """Parse an event log; contexts are rescaled (with a warning) if any norm exceeds 1."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise SnapshotFormatError(f"{path}: unreadable header") from exc
        if not isinstance(header, dict) or header.get("format") != LOG_FORMAT:
            raise SnapshotFormatError(f"{path}: not an event log")
        if header.get("version") != LOG_VERSION:
            raise SnapshotFormatError(f"{path}: unsupported version {header.get('version')!r}")
        dim, n_arms = int(header["dim"]), int(header["n_arms"])
        t, x, a, r, cid = [], [], [], [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                xi = rec["x"]
                if len(xi) != dim:
                    raise SnapshotFormatError(f"{path}:{lineno}: context has {len(xi)} entries, expected {dim}")
                t.append(int(rec["t"]))
                x.append(xi)
                a.append(int(rec["a"]))
                r.append(int(rec["r"]))
                cid.append(rec.get("class_id"))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SnapshotFormatError(f"{path}:{lineno}: malformed record") from exc
    class_col = None if any(c is None for c in cid) or not cid else cid
    xs = np.asarray(x, dtype=float).reshape(len(x), dim)
    try:
        log = EventLog(xs, a, r, t, class_col, n_arms)
    except InvalidArgumentError as exc:
        raise SnapshotFormatError(f"{path}: {exc}") from exc
    return log.normalized()
