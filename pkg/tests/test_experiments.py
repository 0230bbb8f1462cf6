import csv
import json
from pathlib import Path

import numpy as np
import pytest

from courierlab import baselines, experiments
from courierlab.cli import main as cli_main
from courierlab.engine import default_couriers, run_episode
from courierlab.experiments import (
    derive_seed,
    export_trajectories,
    make_instances,
    resolve_policy,
    run_benchmark,
    trailing_price_heat,
)
from courierlab.scenario import load_instance, preset


class TestSeedFanOut:
    def test_instances_independent_of_policy_choice(self):
        a = derive_seed(7, "instance", "base", 0)
        b = derive_seed(7, "instance", "base", 0)
        assert a == b
        assert derive_seed(7, "instance", "base", 1) != a
        assert derive_seed(8, "instance", "base", 0) != a
        assert derive_seed(7, "episode", "base", "random", 0) != a

    def test_make_instances_deterministic(self):
        cfg = preset("desk")
        xs = make_instances(cfg, 2, 11)
        ys = make_instances(cfg, 2, 11)
        assert [len(i.requests) for i in xs] == [len(i.requests) for i in ys]
        assert xs[0].requests[0].location == ys[0].requests[0].location


class TestResolvePolicy:
    def test_baselines_resolve(self):
        for name in ("random", "ghav", "ghep", "mbm"):
            assert resolve_policy(name) is baselines.POLICIES[name]

    def test_missing_checkpoint_fails_early(self):
        with pytest.raises(FileNotFoundError):
            resolve_policy("marl-b", {})
        with pytest.raises(FileNotFoundError):
            resolve_policy("marl-b", {"marl-b": "/nowhere/ck.npz"})

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            resolve_policy("alphago")


class TestBenchmark:
    def test_csv_bytes_identical_across_runs(self, tmp_path):
        out1 = run_benchmark(["desk"], ["random", "ghav"], 2, 42, out_dir=tmp_path / "a")
        out2 = run_benchmark(["desk"], ["random", "ghav"], 2, 42, out_dir=tmp_path / "b")
        a = (tmp_path / "a" / "benchmark.csv").read_bytes()
        b = (tmp_path / "b" / "benchmark.csv").read_bytes()
        assert a == b
        assert out1.to_csv() == out2.to_csv()

    def test_mean_equals_underlying_scores(self, tmp_path):
        result = run_benchmark(["desk"], ["random"], 3, 5)
        cell = result.cell("desk", "random")
        assert cell.mean_score == pytest.approx(float(np.mean(cell.scores)), abs=1e-12)

    def test_adding_policy_keeps_instance_stream(self):
        r1 = run_benchmark(["desk"], ["random"], 2, 9)
        r2 = run_benchmark(["desk"], ["random", "ghav"], 2, 9)
        assert r1.cell("desk", "random").scores == r2.cell("desk", "random").scores


class TestTrajectoryExport:
    def run_episode_pair(self):
        cfg = preset("desk", seed=3)
        inst = make_instances(cfg, 1, 3)[0]
        results = {}
        for name in ("random", "ghav"):
            results[name] = run_episode(
                inst, baselines.POLICIES[name], seed=1, couriers=default_couriers(inst)
            )
        return inst, results

    def test_heat_window_sum(self):
        cfg = preset("desk", seed=3)
        inst = make_instances(cfg, 1, 3)[0]
        t = 120.0
        heat = trailing_price_heat(inst, t, 120.0)
        manual = np.zeros(inst.world.n_grids)
        for r in inst.requests:
            if 0.0 <= r.arrival_time <= t:
                manual[r.grid] += r.price
        assert np.allclose(heat, manual)

    def test_hand_traced_heat(self):
        # requests priced 3 and 4 at t=30 and t=100: trailing 2h sum at t=120 is 7
        from courierlab.domain import GridWorld, Point, Request
        from courierlab.scenario import ProblemInstance

        w = GridWorld(width=2, height=1)
        reqs = [
            Request(0, Point(0.5, 0.5), 0, 30.0, 30.0, 90.0, 2.0, 3.0),
            Request(1, Point(0.4, 0.5), 0, 100.0, 100.0, 160.0, 2.0, 4.0),
        ]
        inst = ProblemInstance(w, reqs, 480.0, {})
        assert trailing_price_heat(inst, 120.0, 120.0)[0] == 7.0

    def test_export_files(self, tmp_path):
        inst, results = self.run_episode_pair()
        paths = export_trajectories(results, inst, tmp_path / "traj")
        doc = json.loads(paths["json"].read_text())
        assert {run["label"] for run in doc["runs"]} == {"ghav", "random"}
        assert doc["world"] == {"width": 8, "height": 8}
        assert len(doc["heat"]["times"]) == len(doc["heat"]["values"])
        assert len(doc["heat"]["values"][0]) == 64
        # CSV schema and ordering
        with open(paths["ghav"]) as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0]) == [
            "courier_id", "decision_time", "from_gx", "from_gy",
            "to_gx", "to_gy", "patrol", "reward", "completion_time",
        ]
        per_courier = {}
        for row in rows:
            per_courier.setdefault(row["courier_id"], []).append(float(row["decision_time"]))
        for times in per_courier.values():
            assert times == sorted(times)

    def test_empty_episode_export(self, tmp_path):
        from courierlab.domain import GridWorld
        from courierlab.scenario import ProblemInstance

        w = GridWorld(width=2, height=2)
        inst = ProblemInstance(w, [], 100.0, {"courier_count": 1, "courier_start_grid": [0, 0]})
        result = run_episode(inst, baselines.random_policy, seed=0)
        paths = export_trajectories({"random": result}, inst, tmp_path / "empty")
        doc = json.loads(paths["json"].read_text())
        assert doc["runs"][0]["score"] == 0.0


class TestCli:
    def test_gen_and_load(self, tmp_path):
        out = tmp_path / "gen"
        assert cli_main([
            "gen", "--scenario", "desk", "--instances", "2", "--seed", "4",
            "--out", str(out),
        ]) == 0
        files = sorted(out.glob("desk_*.json"))
        assert len(files) == 2
        inst = load_instance(files[0])
        assert inst.horizon == 480.0
        assert (out / "config_resolved.json").exists()

    def test_bench_cli(self, tmp_path):
        out = tmp_path / "bench"
        assert cli_main([
            "bench", "--scenario", "desk", "--policy", "random",
            "--instances", "2", "--seed", "4", "--out", str(out),
        ]) == 0
        text = (out / "benchmark.csv").read_text()
        assert text.startswith("scenario,policy,instances,mean_score,std_err")

    def test_export_cli(self, tmp_path):
        out = tmp_path / "exp"
        assert cli_main([
            "export", "--scenario", "desk", "--policy", "random,ghav",
            "--seed", "2", "--out", str(out),
        ]) == 0
        assert (out / "trajectories.json").exists()
        assert (out / "trajectories_random.csv").exists()

    def test_train_eval_cli_roundtrip(self, tmp_path):
        out = tmp_path / "train"
        assert cli_main([
            "train", "--scenario", "desk", "--episodes", "2", "--seed", "1",
            "--train-instances", "2", "--eval-instances", "1",
            "--eval-period", "2", "--out", str(out),
        ]) == 0
        ck = out / "checkpoint_shared.npz"
        assert ck.exists()
        assert (out / "curve.csv").exists()

        out2 = tmp_path / "eval"
        assert cli_main([
            "eval", "--checkpoint", str(ck), "--scenario", "desk",
            "--instances", "2", "--seed", "3", "--out", str(out2),
        ]) == 0
        rows = (out2 / "eval.csv").read_text().splitlines()
        assert rows[0] == "instance,score"
        assert rows[-1].startswith("mean,")

    def test_eval_csv_deterministic(self, tmp_path):
        out = tmp_path / "t"
        cli_main([
            "train", "--scenario", "desk", "--episodes", "1", "--seed", "1",
            "--train-instances", "1", "--eval-instances", "1",
            "--out", str(out),
        ])
        ck = str(out / "checkpoint_shared.npz")
        e1, e2 = tmp_path / "e1", tmp_path / "e2"
        for e in (e1, e2):
            cli_main([
                "eval", "--checkpoint", ck, "--scenario", "desk",
                "--instances", "2", "--seed", "3", "--out", str(e),
            ])
        assert (e1 / "eval.csv").read_bytes() == (e2 / "eval.csv").read_bytes()
