"""Benchmark harness: multi-seed score tables, trajectory export, seed fan-out.

A master seed fans out to per-instance and per-episode streams keyed by
(purpose, scenario, policy, counter), so adding a policy or reordering a run
never perturbs instance generation.
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import baselines
from .engine import EpisodeResult, default_couriers, run_episode
from .marl import load_policy
from .scenario import (
    ProblemInstance,
    ScenarioConfig,
    build_instance,
    preset,
    save_instance,
)

MARL_POLICY_NAMES = ("marl-b", "marl-ep")
POLICY_NAMES = tuple(baselines.POLICIES) + MARL_POLICY_NAMES


def derive_seed(master: int, *labels) -> int:
    """Counter-based split of one master seed into independent streams."""
    entropy = [master & 0xFFFFFFFF]
    for label in labels:
        if isinstance(label, str):
            entropy.append(zlib.crc32(label.encode()))
        else:
            entropy.append(int(label) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def make_instances(
    config: ScenarioConfig, n_instances: int, master_seed: int
) -> list[ProblemInstance]:
    return [
        build_instance(config, seed=derive_seed(master_seed, "instance", config.name, k))
        for k in range(n_instances)
    ]


def build_eval_instances(
    config: ScenarioConfig, n_instances: int, master_seed: int
) -> list[ProblemInstance]:
    """Held-out instances: a stream disjoint from make_instances by design."""
    return [
        build_instance(config, seed=derive_seed(master_seed, "eval-instance", config.name, k))
        for k in range(n_instances)
    ]


def resolve_policy(name: str, checkpoints: Optional[dict] = None):
    """Map a CLI policy name to a dispatcher callable."""
    if name in baselines.POLICIES:
        return baselines.POLICIES[name]
    if name in MARL_POLICY_NAMES:
        checkpoints = checkpoints or {}
        path = checkpoints.get(name) or checkpoints.get("*")
        if not path:
            raise FileNotFoundError(f"policy {name!r} needs a checkpoint (none given)")
        if not Path(path).exists():
            raise FileNotFoundError(f"checkpoint for {name!r} not found: {path}")
        return load_policy(path, mode="greedy")
    raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICY_NAMES)}")


@dataclass
class BenchCell:
    scenario: str
    policy: str
    n_instances: int
    mean_score: float
    std_err: float
    wall_seconds: float
    scores: list[float]


@dataclass
class BenchmarkResult:
    cells: list[BenchCell]

    def cell(self, scenario: str, policy: str) -> BenchCell:
        for c in self.cells:
            if c.scenario == scenario and c.policy == policy:
                return c
        raise KeyError((scenario, policy))

    def to_csv(self) -> str:
        lines = ["scenario,policy,instances,mean_score,std_err"]
        for c in self.cells:
            lines.append(
                f"{c.scenario},{c.policy},{c.n_instances},{c.mean_score:.8f},{c.std_err:.8f}"
            )
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        header = f"{'scenario':<12} {'policy':<8} {'n':>4} {'mean':>8} {'stderr':>8} {'wall_s':>8}"
        rows = [header, "-" * len(header)]
        for c in self.cells:
            rows.append(
                f"{c.scenario:<12} {c.policy:<8} {c.n_instances:>4} "
                f"{c.mean_score:>8.4f} {c.std_err:>8.4f} {c.wall_seconds:>8.2f}"
            )
        return "\n".join(rows)


def run_policy_on_instances(
    policy, instances: list[ProblemInstance], episode_seeds: list[int]
) -> list[EpisodeResult]:
    results = []
    for instance, seed in zip(instances, episode_seeds):
        results.append(
            run_episode(instance, policy, seed=seed, couriers=default_couriers(instance))
        )
    return results


def run_benchmark(
    scenarios: list[str],
    policies: list[str],
    n_instances: int,
    master_seed: int,
    checkpoints: Optional[dict] = None,
    out_dir=None,
    configs: Optional[dict[str, ScenarioConfig]] = None,
    verbose: bool = False,
) -> BenchmarkResult:
    """Score every (scenario, policy) cell on freshly generated instances.

    Missing checkpoints fail before any simulation starts. Scores are the
    served-over-total price ratio per episode, averaged per cell.
    """
    resolved = {p: resolve_policy(p, checkpoints) for p in policies}

    cells = []
    for scenario in scenarios:
        config = (configs or {}).get(scenario) or preset(scenario)
        instances = make_instances(config, n_instances, master_seed)
        for policy_name in policies:
            t0 = time.perf_counter()
            seeds = [
                derive_seed(master_seed, "episode", scenario, policy_name, k)
                for k in range(n_instances)
            ]
            results = run_policy_on_instances(resolved[policy_name], instances, seeds)
            scores = [r.score for r in results]
            wall = time.perf_counter() - t0
            zero_demand = [k for k, inst in enumerate(instances) if not inst.requests]
            if zero_demand and verbose:
                print(f"warning: {scenario} instances {zero_demand} have no requests; score 0")
            mean = float(np.mean(scores)) if scores else 0.0
            stderr = (
                float(np.std(scores, ddof=1) / np.sqrt(len(scores))) if len(scores) > 1 else 0.0
            )
            cells.append(
                BenchCell(
                    scenario=scenario,
                    policy=policy_name,
                    n_instances=n_instances,
                    mean_score=mean,
                    std_err=stderr,
                    wall_seconds=wall,
                    scores=scores,
                )
            )
            if verbose:
                c = cells[-1]
                print(f"{scenario}/{policy_name}: mean {c.mean_score:.4f} "
                      f"(se {c.std_err:.4f}, {wall:.1f}s)", flush=True)

    result = BenchmarkResult(cells=cells)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "benchmark.csv").write_text(result.to_csv())
        (out / "benchmark.txt").write_text(result.to_table() + "\n")
    return result


# ---------------------------------------------------------------------------
# Trajectory export


def trailing_price_heat(
    instance: ProblemInstance, t: float, window_minutes: float = 120.0
) -> np.ndarray:
    """Per-grid price of requests appearing within [t - window, t]."""
    heat = np.zeros(instance.world.n_grids)
    for r in instance.requests:
        if t - window_minutes <= r.arrival_time <= t:
            heat[r.grid] += r.price
    return heat


def export_trajectories(
    results: dict[str, EpisodeResult],
    instance: ProblemInstance,
    out_base,
    heat_step: float = 10.0,
    heat_window: float = 120.0,
) -> dict[str, Path]:
    """Write the trajectory JSON (all runs + demand heat) and one CSV per run.

    The heat field is the plotting background: per sampled time, per grid,
    the cumulative price of requests that appeared in the trailing window.
    """
    out_base = Path(out_base)
    out_base.parent.mkdir(parents=True, exist_ok=True)
    world = instance.world

    times = [float(t) for t in np.arange(0.0, instance.horizon + 1e-9, heat_step)]
    heat_values = [trailing_price_heat(instance, t, heat_window).tolist() for t in times]

    runs = []
    paths: dict[str, Path] = {}
    for label in sorted(results):
        result = results[label]
        couriers = []
        csv_lines = [
            "courier_id,decision_time,from_gx,from_gy,to_gx,to_gy,patrol,reward,completion_time"
        ]
        for cid in sorted(result.decisions):
            steps = []
            for d in result.decisions[cid]:
                fx, fy = world.grid_coords(d.from_grid)
                tx, ty = world.grid_coords(d.target_grid)
                completion = "" if d.completion_time is None else f"{d.completion_time:.6f}"
                steps.append(
                    {
                        "t": d.decision_time,
                        "from": [fx, fy],
                        "to": [tx, ty],
                        "patrol": d.action.patrol_minutes,
                        "reward": d.reward,
                        "completion": d.completion_time,
                    }
                )
                csv_lines.append(
                    f"{cid},{d.decision_time:.6f},{fx},{fy},{tx},{ty},"
                    f"{d.action.patrol_minutes},{d.reward:.6f},{completion}"
                )
            couriers.append(
                {"id": cid, "fleet": result.courier_fleet.get(cid, ""), "steps": steps}
            )
        runs.append({"label": label, "score": result.score, "couriers": couriers})
        csv_path = out_base.with_name(f"{out_base.stem}_{label}.csv")
        csv_path.write_text("\n".join(csv_lines) + "\n")
        paths[label] = csv_path

    doc = {
        "world": {"width": world.width, "height": world.height},
        "horizon": instance.horizon,
        "heat": {"window_minutes": heat_window, "times": times, "values": heat_values},
        "runs": runs,
    }
    json_path = out_base.with_suffix(".json")
    json_path.write_text(json.dumps(doc))
    paths["json"] = json_path
    return paths


def _jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {_key(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str, bool)):
        return _jsonable(obj.value)  # enums
    return obj


def _key(k):
    if hasattr(k, "value") and not isinstance(k, (int, float, str, bool)):
        return str(k.value)
    return str(k) if not isinstance(k, str) else k


def emit_resolved_config(out_dir, payload: dict) -> Path:
    """Drop the fully-resolved run parameters next to the outputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "config_resolved.json"
    path.write_text(json.dumps(_jsonable(payload), indent=1, sort_keys=True, default=str))
    return path


def write_instances(
    config: ScenarioConfig, n_instances: int, master_seed: int, out_dir
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, instance in enumerate(make_instances(config, n_instances, master_seed)):
        path = out / f"{config.name}_{k:03d}.json"
        save_instance(instance, path)
        paths.append(path)
    return paths
