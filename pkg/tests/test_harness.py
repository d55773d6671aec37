import csv
import json

import numpy as np
import pytest

from hatchbandit import BudgetState, InvalidArgumentError, PolicyConfig, SnapshotFormatError, make_policy
from hatchbandit.environments import SyntheticConfig, generate_synthetic
from hatchbandit.harness import (
    ExperimentConfig,
    RunMetrics,
    derive_seeds,
    emit_reports,
    load_config,
    restore,
    restore_into,
    run_experiment,
    snapshot,
)
from hatchbandit.policy import PolicyKind

SMALL_WORLD = SyntheticConfig(n_contexts=2000, context_spread=None, bias_feature=True)


def small_cfg(tmp_path=None, **kw):
    base = dict(rho=0.25, horizon=1000, replicas=2, seed=3, synthetic=SMALL_WORLD,
                policy=PolicyConfig(lam=0.3, alpha_override=1.0))
    base.update(kw)
    if tmp_path is not None:
        base["output_dir"] = str(tmp_path)
    return ExperimentConfig(**base)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- config ---------------------------------------------------------------
def test_budget_floor():
    assert small_cfg(rho=0.3, horizon=1001).budget == 300


@pytest.mark.parametrize("kw", [{"replicas": 0}, {"rho": -0.1}, {"horizon": 0}, {"environment": "replay_log"},
                                {"environment": "nope"}, {"workers": 0}])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        small_cfg(**kw)


def test_config_file_round_trip(tmp_path):
    cfg = small_cfg(tmp_path)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path).to_dict() == cfg.to_dict()


def test_config_yaml(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("rho: 0.5\nhorizon: 200\npolicy:\n  policy_kind: greedy_linucb\n  lam: 2.0\n")
    cfg = load_config(path)
    assert cfg.rho == 0.5 and cfg.policy.policy_kind is PolicyKind.GREEDY_LINUCB and cfg.policy.lam == 2.0


@pytest.mark.parametrize("text", ["rhoo: 0.5\n", "policy: {lambda: 1}\n", "- 1\n", "rho: [1\n", "policy: {lam: -1}\n"])
def test_config_file_errors(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    with pytest.raises(InvalidArgumentError):
        load_config(path)


# -- seeds ----------------------------------------------------------------
def test_seed_derivation():
    a, shared = derive_seeds(5, 3)
    b, _ = derive_seeds(5, 4)
    assert a == b[:3]
    values = [s.world_seed for s in b] + [s.env_seed for s in b] + [s.policy_seed for s in b] + [shared]
    assert len(set(values)) == len(values)


# -- runner ---------------------------------------------------------------
def test_zero_budget_run():
    m = run_experiment(small_cfg(rho=0.0))
    for r in m.replicas:
        assert r.executed_total == 0
        assert np.all(r.cumulative_regret == 0) and np.all(r.cumulative_reward == 0)


def test_greedy_exhausts_at_quarter():
    T = 10_000
    m = run_experiment(small_cfg(horizon=T, replicas=1, policy=PolicyConfig(policy_kind="greedy_linucb")))
    r = m.replicas[0]
    assert r.executed_total == 2500
    assert r.budget_trace[2499] == 0 and r.budget_trace[2498] == 1


@pytest.mark.parametrize("kind", list(PolicyKind))
def test_run_invariants(kind):
    cfg = small_cfg(policy=PolicyConfig(policy_kind=kind, lam=0.3, alpha_override=1.0))
    m = run_experiment(cfg)
    for r in m.replicas:
        assert r.executed_total <= cfg.budget
        for series in (r.cumulative_reward, r.cumulative_regret, r.cumulative_regret_full):
            assert np.all(np.diff(series) >= -1e-12)
        assert np.all(r.cumulative_regret_full >= r.cumulative_regret - 1e-12)
    assert m.allocation_table()["occupancy_rate"].sum() == pytest.approx(1.0, abs=1e-9)


def test_regret_matches_manual_oracle():
    cfg = small_cfg(replicas=1, horizon=300, rho=0.5)
    m = run_experiment(cfg)
    seeds = m.replicas[0].seeds
    world = generate_synthetic(SyntheticConfig(**{**SMALL_WORLD.to_dict(), "seed": seeds.world_seed}))
    rng = np.random.default_rng(seeds.env_seed)
    cls, X, noise = world.sample_stream(cfg.horizon, rng)
    pol = make_policy(PolicyConfig(lam=0.3, alpha_override=1.0, seed=seeds.policy_seed), n_arms=10,
                      budget=BudgetState.from_ratio(0.5, 300), centers=world.class_centers(), phi=world.phi)
    regret = 0.0
    for t in range(cfg.horizon):
        d = pol.decide(X[t], class_id=int(cls[t]))
        if d.executed:
            er = world.expected_rewards(X[t], int(cls[t]))
            regret += er.max() - er[d.arm]
            pol.feedback(d, X[t], world.reward_from_noise(X[t], int(cls[t]), d.arm, noise[t]))
        else:
            pol.skip(d)
    assert m.replicas[0].cumulative_regret[-1] == pytest.approx(regret, rel=1e-9)


def test_worker_pool_matches_serial():
    serial = run_experiment(small_cfg(horizon=400))
    pooled = run_experiment(small_cfg(horizon=400, workers=2))
    for a, b in zip(serial.replicas, pooled.replicas):
        np.testing.assert_array_equal(a.cumulative_regret, b.cumulative_regret)


def test_replay_missing_log(tmp_path):
    cfg = small_cfg(environment="replay_log", log_path=str(tmp_path / "absent.jsonl"))
    with pytest.raises(FileNotFoundError):
        run_experiment(cfg)


# -- reports --------------------------------------------------------------
CSV_FILES = ("regret_curve.csv", "ctr_curve.csv", "allocation_by_class.csv", "budget_trace.csv")


def test_reports_written_and_consistent(tmp_path):
    m = run_experiment(small_cfg())
    files = emit_reports(m, tmp_path)
    for name in CSV_FILES + ("manifest.json", "timing.json", "metrics.npz"):
        assert (tmp_path / name).is_file()
    regret = read_csv(files["regret_curve"])
    assert list(regret[0]) == ["round", "mean", "std", "regret_full_mean", "regret_full_std"]
    assert len(regret) == 1000 and regret[0]["round"] == "1"
    alloc = read_csv(files["allocation_by_class"])
    assert list(alloc[0]) == ["class", "allocation_rate", "occupancy_rate", "mean_reward"]
    assert sum(float(r["occupancy_rate"]) for r in alloc) == pytest.approx(1.0, abs=1e-9)
    manifest = json.loads(files["manifest"].read_text())
    assert manifest["config"] == m.config.to_dict()
    assert [s["policy_seed"] for s in manifest["replica_seeds"]] == [r.seeds.policy_seed for r in m.replicas]
    assert "numpy" in manifest["versions"]


def test_reports_byte_identical(tmp_path):
    for sub in ("a", "b"):
        emit_reports(run_experiment(small_cfg()), tmp_path / sub)
    for name in CSV_FILES + ("manifest.json",):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_metrics_round_trip(tmp_path):
    m = run_experiment(small_cfg())
    m.save(tmp_path / "m.npz")
    back = RunMetrics.load(tmp_path / "m.npz")
    emit_reports(m, tmp_path / "a", save_metrics=False)
    emit_reports(back, tmp_path / "b", save_metrics=False)
    for name in CSV_FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_empty_replica_set(tmp_path):
    with pytest.raises(InvalidArgumentError):
        emit_reports(RunMetrics(small_cfg(), []), tmp_path)


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_reports(run_experiment(small_cfg(horizon=50)), blocker / "sub")


# -- snapshots ------------------------------------------------------------
def trained(kind, seed=0, T=200):
    world = generate_synthetic(SyntheticConfig(seed=1, n_contexts=1000))
    pol = make_policy(PolicyConfig(policy_kind=kind, seed=seed, lam=0.5), n_arms=10,
                      budget=BudgetState.from_ratio(0.5, 2 * T), centers=world.class_centers(), phi=world.phi)
    rng = np.random.default_rng(seed)
    for _ in range(T):
        j, x = world.sample_context(rng)
        d = pol.decide(x, class_id=j)
        if d.executed:
            pol.feedback(d, x, world.sample_reward(x, j, d.arm, rng))
        else:
            pol.skip(d)
    return world, pol, rng


def decision_stream(world, pol, rng, n=100):
    out = []
    for _ in range(n):
        j, x = world.sample_context(rng)
        d = pol.decide(x, class_id=j)
        out.append((d.arm, d.executed, d.retain_prob))
        if d.executed:
            pol.feedback(d, x, world.sample_reward(x, j, d.arm, rng))
        else:
            pol.skip(d)
    return out


@pytest.mark.parametrize("kind", list(PolicyKind))
def test_snapshot_restore_same_future(tmp_path, kind):
    world, pol, rng = trained(kind)
    path = tmp_path / "snap.json"
    snapshot(pol, path)
    env_state = rng.bit_generator.state
    expected = decision_stream(world, pol, rng)
    restored = restore(path)
    rng.bit_generator.state = env_state
    assert decision_stream(world, restored, rng) == expected


def test_restore_into_existing(tmp_path):
    world, pol, rng = trained(PolicyKind.HATCH)
    path = tmp_path / "snap.json"
    snapshot(pol, path)
    _, fresh, _ = trained(PolicyKind.HATCH, seed=5, T=3)
    restore_into(fresh, path)
    assert fresh.to_state() == pol.to_state()


def test_fresh_snapshot_grams(tmp_path):
    pol = make_policy(PolicyConfig(lam=0.4), n_arms=3, budget=BudgetState(5, 10),
                      centers=[[0.5, 0.0], [0.0, 0.5]], phi=[0.5, 0.5])
    path = tmp_path / "snap.json"
    snapshot(pol, path)
    learner = json.loads(path.read_text())["state"]["learner"]
    for bank in learner["arm_models"]:
        for m in bank:
            np.testing.assert_array_equal(m["gram"], 0.4 * np.eye(2))
    for m in learner["class_models"]:
        np.testing.assert_array_equal(m["gram"], np.eye(2))


def test_restore_wrong_dimension(tmp_path):
    pol = make_policy(PolicyConfig(), n_arms=3, budget=BudgetState(5, 10), centers=[[0.5, 0.0], [0.0, 0.5]], phi=[0.5, 0.5])
    other = make_policy(PolicyConfig(), n_arms=3, budget=BudgetState(5, 10),
                        centers=[[0.5, 0.0, 0.0], [0.0, 0.5, 0.0]], phi=[0.5, 0.5])
    path = tmp_path / "snap.json"
    snapshot(other, path)
    with pytest.raises(SnapshotFormatError):
        restore_into(pol, path)


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(version=2),
    lambda d: d.update(format="other"),
    lambda d: d["state"].pop("learner"),
    lambda d: d["state"]["learner"]["arm_models"][0][0].update(gram=[[1.0]]),
])
def test_restore_corrupt(tmp_path, mutate):
    pol = make_policy(PolicyConfig(), n_arms=3, budget=BudgetState(5, 10), centers=[[0.5, 0.0], [0.0, 0.5]], phi=[0.5, 0.5])
    path = tmp_path / "snap.json"
    snapshot(pol, path)
    doc = json.loads(path.read_text())
    mutate(doc)
    path.write_text(json.dumps(doc))
    with pytest.raises(SnapshotFormatError):
        restore(path)


def test_restore_not_json(tmp_path):
    path = tmp_path / "snap.json"
    path.write_text("{oops")
    with pytest.raises(SnapshotFormatError):
        restore(path)


def test_restore_kind_mismatch(tmp_path):
    _, pol, _ = trained(PolicyKind.HATCH, T=5)
    _, other, _ = trained(PolicyKind.CLUSTER_UCB_ALP, T=5)
    path = tmp_path / "snap.json"
    snapshot(other, path)
    with pytest.raises(SnapshotFormatError):
        restore_into(pol, path)
