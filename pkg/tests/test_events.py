import json
import logging

import numpy as np
import pytest

from hatchbandit import InvalidArgumentError, SnapshotFormatError
from hatchbandit.environments import EventLog, read_event_log, write_event_log


def small_log(n=50, seed=0, with_class=True):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 0.4, (n, 3))
    return EventLog(x, rng.integers(4, size=n), rng.integers(2, size=n),
                    class_id=rng.integers(3, size=n) if with_class else None, n_arms=4)


@pytest.mark.parametrize("with_class", [True, False])
def test_round_trip(tmp_path, with_class):
    log = small_log(with_class=with_class)
    path = tmp_path / "events.jsonl"
    write_event_log(log, path)
    back = read_event_log(path)
    np.testing.assert_array_equal(back.x, log.x)
    np.testing.assert_array_equal(back.a, log.a)
    np.testing.assert_array_equal(back.r, log.r)
    np.testing.assert_array_equal(back.t, log.t)
    assert back.n_arms == 4
    if with_class:
        np.testing.assert_array_equal(back.class_id, log.class_id)
    else:
        assert back.class_id is None


def test_header_declares_shape(tmp_path):
    path = tmp_path / "e.jsonl"
    write_event_log(small_log(), path)
    header = json.loads(path.read_text().splitlines()[0])
    assert header["dim"] == 3 and header["n_arms"] == 4


def test_rescales_long_contexts(tmp_path, caplog):
    log = EventLog([[3.0, 4.0], [0.3, 0.4]], [0, 1], [1, 0])
    path = tmp_path / "e.jsonl"
    write_event_log(log, path)
    with caplog.at_level(logging.WARNING):
        back = read_event_log(path)
    assert "rescaling" in caplog.text
    np.testing.assert_allclose(back.x, [[0.6, 0.8], [0.06, 0.08]])


@pytest.mark.parametrize(
    "text",
    [
        "",
        "not json\n",
        '{"format": "other", "version": 1, "dim": 2, "n_arms": 2}\n',
        '{"format": "hatchbandit.events", "version": 9, "dim": 2, "n_arms": 2}\n',
        '{"format": "hatchbandit.events", "version": 1, "dim": 2, "n_arms": 2}\n{"t": 0, "x": [0.1], "a": 0, "r": 1}\n',
        '{"format": "hatchbandit.events", "version": 1, "dim": 2, "n_arms": 2}\n{"t": 0, "x": [0.1, 0.1], "a": 0}\n',
        '{"format": "hatchbandit.events", "version": 1, "dim": 2, "n_arms": 2}\n{"t": 0, "x": [0.1, 0.1], "a": 0, "r": 2}\n',
        '{"format": "hatchbandit.events", "version": 1, "dim": 2, "n_arms": 2}\n{"t": 0, "x": [0.1, 0.1], "a": 5, "r": 1}\n',
    ],
)
def test_corrupt_logs(tmp_path, text):
    path = tmp_path / "bad.jsonl"
    path.write_text(text)
    with pytest.raises(SnapshotFormatError):
        read_event_log(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_event_log(tmp_path / "absent.jsonl")


@pytest.mark.parametrize(
    "kw",
    [
        {"x": np.zeros((2, 2)), "a": [0, 1], "r": [0, 1, 1]},
        {"x": np.zeros((2, 2)), "a": [0, 1], "r": [0, 2]},
        {"x": np.zeros((2, 2)), "a": [0, -1], "r": [0, 1]},
        {"x": np.zeros((2, 2)), "a": [0, 3], "r": [0, 1], "n_arms": 2},
    ],
)
def test_event_log_validation(kw):
    with pytest.raises(InvalidArgumentError):
        EventLog(**kw)


def test_iteration_and_subset():
    log = small_log(10)
    events = list(log)
    assert len(events) == 10 and events[3].a == log.a[3]
    sub = log.subset([1, 4])
    assert len(sub) == 2 and sub.n_arms == 4
    np.testing.assert_array_equal(sub.x[1], log.x[4])
