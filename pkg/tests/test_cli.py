import csv
import json

import numpy as np
import pytest

from d2dreuse.cli import (
    AREA_M,
    config_hash,
    gen_scenario,
    main,
    metrics,
    run_experiment,
)
from d2dreuse.model import Rates


def make_rates(values_bps):
    r = np.asarray(values_bps, dtype=float)
    return Rates(r_bar=r, r_tilde=np.zeros(len(r) + 1), r_eff=r)


class TestMetrics:
    def test_geometric_mean(self):
        m = metrics(make_rates([10e6, 40e6]))
        assert m["gm_mbps"] == pytest.approx(20.0)
        assert m["pf"] == pytest.approx(np.log(10e6) + np.log(40e6))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            metrics(make_rates([10e6, 0.0]))


class TestGenScenario:
    def test_deterministic(self):
        a = gen_scenario(5, seed=42, walls_random=3)
        b = gen_scenario(5, seed=42, walls_random=3)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.walls, b.walls)

    def test_bs_centered_dues_in_area(self):
        sc = gen_scenario(8, seed=1)
        assert np.array_equal(sc.positions[0], [AREA_M / 2, AREA_M / 2])
        assert np.all((sc.positions[1:] >= 0) & (sc.positions[1:] <= AREA_M))
        assert sc.tx_power_dbm[0] == 30.0
        assert np.all(sc.tx_power_dbm[1:] == 20.0)

    def test_wall_counts_bounded(self):
        sc = gen_scenario(6, seed=2, walls_random=4)
        assert sc.walls.shape == (7, 6)
        assert sc.walls.min() >= 0 and sc.walls.max() <= 4

    def test_rejects_zero_dues(self):
        with pytest.raises(ValueError):
            gen_scenario(0, seed=0)


class TestConfigHash:
    def test_key_order_independent(self):
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})

    def test_value_sensitive(self):
        assert config_hash({"a": 1}) != config_hash({"a": 2})


class TestRunExperiment:
    def test_all_methods_outputs(self, tmp_path):
        config = {"scenario": {"dues": 3, "seed": 5}, "methods": ["algo", "brute", "orthogonal", "bs_only"]}
        reports, infeasible = run_experiment(config, tmp_path, trace=True)
        assert infeasible == []
        for m in config["methods"]:
            doc = json.loads((tmp_path / f"report_{m}.json").read_text())
            assert doc["method"] == m
            assert doc["config_hash"] == config_hash(config)
            assert doc["seed"] == 5
            with open(tmp_path / f"cdf_{m}.csv") as fh:
                rows = list(csv.DictReader(fh))
            assert float(rows[-1]["quantile"]) == 1.0
            cdf_rates = sorted(float(r["rate_mbps"]) for r in rows)
            rep_rates = sorted(reports[m].final_allocation.rates.r_eff / 1e6)
            assert cdf_rates == pytest.approx(rep_rates, rel=1e-6)
        with open(tmp_path / "summary.csv") as fh:
            rows = {r["method"]: r for r in csv.DictReader(fh)}
        assert set(rows) == set(config["methods"])
        assert abs(float(rows["algo"]["gap_vs_brute"])) <= 0.05
        assert (tmp_path / "trace_algo.csv").exists()

    def test_reproducible_reports(self, tmp_path):
        config = {"scenario": {"dues": 3, "seed": 9}, "methods": ["brute"]}
        run_experiment(config, tmp_path / "a")
        run_experiment(config, tmp_path / "b")
        da = json.loads((tmp_path / "a/report_brute.json").read_text())
        db = json.loads((tmp_path / "b/report_brute.json").read_text())
        da.pop("wall_time_s"), db.pop("wall_time_s")
        assert da == db

    def test_infeasible_method_reported(self, tmp_path):
        config = {"scenario": {"dues": 1, "seed": 3}, "methods": ["orthogonal"]}
        reports, infeasible = run_experiment(config, tmp_path)
        assert infeasible == ["orthogonal"]
        doc = json.loads((tmp_path / "report_orthogonal.json").read_text())
        assert doc["status"] == "INFEASIBLE"

    def test_unknown_method_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            run_experiment({"scenario": {"dues": 2, "seed": 0}, "methods": ["magic"]}, tmp_path)


class TestMain:
    def test_gen_round_trip(self, tmp_path, capsys):
        out = tmp_path / "scenario.json"
        assert main(["gen", "--dues", "4", "--seed", "7", "--out", str(out)]) == 0
        from d2dreuse import Scenario

        sc = Scenario.load(out)
        assert sc.num_due == 4 and sc.seed == 7

    def test_run_exit_codes(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"scenario": {"dues": 2, "seed": 1}, "methods": ["algo"]}))
        assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "out")]) == 0
        cfg.write_text(json.dumps({"scenario": {"dues": 1, "seed": 3}, "methods": ["orthogonal"]}))
        assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "out2")]) == 2

    def test_run_methods_override(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"scenario": {"dues": 2, "seed": 1}, "methods": ["algo"]}))
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--methods", "bs-only", "--out-dir", str(out)]) == 0
        assert (out / "report_bs_only.json").exists()
        assert not (out / "report_algo.json").exists()

    def test_compare_writes_table(self, tmp_path, capsys):
        out = tmp_path / "compare.csv"
        assert main(["compare", "--seeds", "0..1", "--dues", "3", "--out", str(out)]) == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert [r["seed"] for r in rows] == ["0", "1"]
        for r in rows:
            assert float(r["gm_algo_mbps"]) > 0

    def test_usage_errors(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
        assert main(["gen", "--dues", "0", "--seed", "1", "--out", str(tmp_path / "s.json")]) == 1
        assert main(["frobnicate"]) == 1
