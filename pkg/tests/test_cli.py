import json
import subprocess
import sys

import pytest
import yaml

from hatchbandit.harness.cli import EXIT_EXHAUSTED, EXIT_INVALID, EXIT_IO, EXIT_OK, main


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return path


@pytest.fixture
def syn_cfg(tmp_path):
    return write_yaml(tmp_path / "syn.yaml", {
        "rho": 0.25, "horizon": 300, "replicas": 2, "seed": 1, "output_dir": str(tmp_path / "out"),
        "policy": {"policy_kind": "hatch", "lam": 0.3, "alpha_override": 1.0},
        "synthetic": {"n_contexts": 2000, "context_spread": 0.15},
    })


def test_run(tmp_path, syn_cfg, capsys):
    assert main(["run", "--config", str(syn_cfg)]) == EXIT_OK
    assert (tmp_path / "out" / "regret_curve.csv").is_file()
    assert "regret=" in capsys.readouterr().out


def test_generate_cluster_evaluate_report(tmp_path, syn_cfg):
    gen = tmp_path / "gen"
    assert main(["generate", "--config", str(syn_cfg), "--out-dir", str(gen), "--events", "6000"]) == EXIT_OK
    assert (gen / "events.jsonl").is_file() and (gen / "world.npz").is_file()
    model = gen / "model.json"
    assert main(["cluster", "--log", str(gen / "events.jsonl"), "--classes", "10", "--out", str(model)]) == EXIT_OK
    assert json.loads(model.read_text())["format"] == "hatchbandit.cluster_model"
    rep = write_yaml(tmp_path / "rep.yaml", {"rho": 0.25, "horizon": 200, "replicas": 1, "output_dir": str(tmp_path / "rep"),
                                             "policy": {"policy_kind": "random_linucb"}})
    assert main(["evaluate", "--config", str(rep), "--log", str(gen / "events.jsonl"), "--model", str(model)]) == EXIT_OK
    assert not (tmp_path / "rep" / "regret_curve.csv").exists()
    assert (tmp_path / "rep" / "ctr_curve.csv").is_file()
    again = tmp_path / "again"
    assert main(["report", "--metrics", str(tmp_path / "rep" / "metrics.npz"), "--output-dir", str(again)]) == EXIT_OK
    assert (again / "ctr_curve.csv").read_bytes() == (tmp_path / "rep" / "ctr_curve.csv").read_bytes()


def test_evaluate_exhaustion(tmp_path, syn_cfg):
    gen = tmp_path / "gen"
    main(["generate", "--config", str(syn_cfg), "--out-dir", str(gen), "--events", "300"])
    rep = write_yaml(tmp_path / "rep.yaml", {"rho": 1.0, "horizon": 2000, "replicas": 1, "n_classes": 3,
                                             "output_dir": str(tmp_path / "rep"), "policy": {"policy_kind": "uniform_random"}})
    assert main(["evaluate", "--config", str(rep), "--log", str(gen / "events.jsonl")]) == EXIT_EXHAUSTED
    assert json.loads((tmp_path / "rep" / "manifest.json").read_text())["exhausted"] == [True]


@pytest.mark.parametrize("content", ["bogus: 1\n", "rho: -1\n", "policy: {policy_kind: nope}\n", "environment: replay_log\n"])
def test_invalid_config_exit(tmp_path, content):
    path = tmp_path / "bad.yaml"
    path.write_text(content)
    assert main(["run", "--config", str(path)]) == EXIT_INVALID


def test_missing_files_exit(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == EXIT_IO
    assert main(["report", "--metrics", str(tmp_path / "absent.npz"), "--output-dir", str(tmp_path)]) == EXIT_IO
    assert main(["cluster", "--log", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "m.json")]) == EXIT_IO


def test_corrupt_log_exit(tmp_path):
    log = tmp_path / "bad.jsonl"
    log.write_text("garbage\n")
    assert main(["cluster", "--log", str(log), "--out", str(tmp_path / "m.json")]) == EXIT_IO


def test_bad_arguments_exit():
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path, syn_cfg):
    proc = subprocess.run([sys.executable, "-m", "hatchbandit", "run", "--config", str(syn_cfg)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
