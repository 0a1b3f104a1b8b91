import csv
import io
import json
import os
from pathlib import Path

import pytest

import fedmint

DATA = Path(os.environ.get("FEDMINT_TEST_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))


def device_sample():
    with open(DATA / "device_sample.csv", newline="") as fh:
        return [(r["provider"], r["region"], r["device_type"], float(r["accuracy"])) for r in csv.DictReader(fh)]


def test_rewards():
    assert fedmint.operational_earnings(500, 600, 0.002, 0.001) == pytest.approx(1.6)
    assert fedmint.traffic_earnings(700, 0.001, 0.2) == pytest.approx(0.56)
    r = fedmint.total_reward(1.6, 0.56, 0.7, 0.8)
    assert r["total"] == pytest.approx(2.052, abs=1e-9)
    assert r["penalty_factor"] == pytest.approx(0.95)
    assert fedmint.scale_latency(2.55, 0.1, 5.0) == pytest.approx(0.5)
    assert fedmint.global_accuracy([(0.9, 100), (0.5, 300)]) == pytest.approx(0.6)


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        fedmint.total_reward(1.0, 1.0, 1.5, 0.5)
    with pytest.raises(fedmint.RangeError):
        fedmint.scale_latency(9.0, 0.1, 5.0)
    with pytest.raises(fedmint.ConfigError):
        fedmint.ExperimentConfig.from_toml("[bootstrap]\nkfold = 0\n")


def test_motivation_function():
    assert fedmint.update_calls(0, 0, 0.0) == 1
    assert fedmint.update_calls(5, 3, 0.5) == 10
    assert fedmint.update_calls(2, 4, 1.0) == 11
    assert fedmint.data_rate(50, 200) == pytest.approx(0.25)


def test_sample_tree():
    rows = device_sample()
    acc = [r[3] for r in rows]
    assert fedmint.population_sd(acc) == pytest.approx(13.96, abs=0.01)
    assert fedmint.coefficient_of_variation(acc) == pytest.approx(21.31, abs=0.05)
    assert fedmint.sdr(rows, "Provider") == pytest.approx(5.83, abs=0.03)
    assert [s["attribute"] for s in fedmint.split_table(rows)] == ["Provider", "Region", "DeviceType"]
    tree = fedmint.RegressionTree.build(rows, min_instances=3, cv_threshold=10.0)
    assert tree.root_split == "Provider"
    assert tree.predict("P2", "Asia", "Watch") == pytest.approx(54.625)
    assert "Provider = P2 -> 54.62" in str(tree)


def test_matching():
    devices = {"d09": ["A", "B"], "d08": ["A", "B"], "d07": ["A", "B"]}
    servers = {"A": ["d09", "d08", "d07"], "B": ["d09", "d08", "d07"]}
    caps = {"A": 1, "B": 1}
    m = fedmint.run_matching(devices, servers, caps)
    assert m == {"d09": "A", "d08": "B", "d07": None}
    assert fedmint.is_stable(devices, servers, caps, m)
    assert fedmint.brute_force_stable(devices, servers, caps) == [m]
    assert not fedmint.is_stable(devices, servers, caps, {"d07": "A"})
    big = {f"d{i}": ["A"] for i in range(9)}
    with pytest.raises(fedmint.OracleRefused):
        fedmint.brute_force_stable(big, {"A": []}, {"A": 1})


def test_experiment_round_trip():
    cfg = fedmint.ExperimentConfig()
    cfg.rounds = 2
    cfg.repetitions = 1
    cfg.arms = ["fedmint", "vanilla"]
    report = fedmint.run_experiment(cfg)
    rows = list(csv.DictReader(io.StringIO(report.rounds_csv())))
    assert len(rows) == 2 * 2 * 2
    assert set(report.summary) == {"fedmint", "vanilla"}
    summary = json.loads(report.summary_json())
    assert summary["rounds"] == 2
    assert fedmint.run_experiment(cfg).rounds_csv() == report.rounds_csv()


def test_custom_trainer():
    cfg = fedmint.ExperimentConfig()
    cfg.rounds = 1
    cfg.repetitions = 1
    cfg.arms = ["vanilla"]
    seen = []

    def trainer(device, participation):
        seen.append(device["device_id"])
        return 0.5

    report = fedmint.run_experiment(cfg, trainer=trainer)
    assert len(seen) == 20
    assert all(r["global_accuracy"] == "0.500000" for r in csv.DictReader(io.StringIO(report.rounds_csv())))
