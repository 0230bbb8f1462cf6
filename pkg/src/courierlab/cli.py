"""Command-line entry points: gen, bench, train, eval, export."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments, marl
from .engine import default_couriers, run_episode
from .scenario import PRESETS, ScenarioConfig, preset


def _scenario_config(args) -> ScenarioConfig:
    config = preset(args.scenario, seed=getattr(args, "seed", 0))
    overrides = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            overrides = json.load(f)
    known = set(ScenarioConfig.__dataclass_fields__)
    bad = set(overrides) - known
    if bad:
        raise SystemExit(f"unknown scenario config keys: {sorted(bad)}")
    if "rate_matrix" in overrides:
        from .domain import GridType

        overrides["rate_matrix"] = {
            GridType(k): tuple(v) for k, v in overrides["rate_matrix"].items()
        }
    if overrides:
        config = replace(config, **overrides)
    return config


def _parse_checkpoints(values) -> dict:
    out = {}
    for v in values or []:
        if "=" in v:
            name, path = v.split("=", 1)
            out[name] = path
        else:
            out["*"] = v
    return out


def _parse_fleets(spec: str) -> tuple[marl.FleetSpec, ...]:
    fleets = []
    for k, seg in enumerate(spec.split(",")):
        parts = seg.strip().split(":")
        if len(parts) < 2:
            raise SystemExit(f"fleet segment {seg!r} must look like policy:count[:learner]")
        policy, count = parts[0], int(parts[1])
        learner = parts[2] if len(parts) > 2 else None
        name = f"{policy}{k}"
        fleets.append(marl.FleetSpec(name=name, count=count, policy=policy, learner=learner))
    return tuple(fleets)


def _parse_imitation(spec: str) -> marl.ImitationSchedule:
    parts = spec.split(":")
    mode = parts[0]
    if mode == "none":
        return marl.ImitationSchedule()
    if mode == "full":
        return marl.ImitationSchedule(mode="full", until_episode=int(parts[1]))
    if mode == "mixed":
        prob = float(parts[2]) if len(parts) > 2 else 0.2
        return marl.ImitationSchedule(mode="mixed", until_episode=int(parts[1]), prob=prob)
    raise SystemExit(f"imitation spec {spec!r} must be none, full:E, or mixed:E[:p]")


def cmd_gen(args) -> int:
    config = _scenario_config(args)
    paths = experiments.write_instances(config, args.instances, args.seed, args.out)
    experiments.emit_resolved_config(
        args.out,
        {"command": "gen", "scenario": config, "instances": args.instances, "seed": args.seed},
    )
    print(f"wrote {len(paths)} instances to {args.out}")
    return 0


def cmd_bench(args) -> int:
    scenarios = args.scenario.split(",")
    policies = args.policy.split(",")
    checkpoints = _parse_checkpoints(args.checkpoint)
    configs = None
    if args.config:
        configs = {}
        for s in scenarios:
            ns = argparse.Namespace(scenario=s, seed=args.seed, config=args.config)
            configs[s] = _scenario_config(ns)
    result = experiments.run_benchmark(
        scenarios,
        policies,
        args.instances,
        args.seed,
        checkpoints=checkpoints,
        out_dir=args.out,
        configs=configs,
        verbose=True,
    )
    experiments.emit_resolved_config(
        args.out,
        {
            "command": "bench",
            "scenarios": scenarios,
            "policies": policies,
            "instances": args.instances,
            "seed": args.seed,
            "checkpoints": checkpoints,
        },
    )
    print(result.to_table())
    return 0


def cmd_train(args) -> int:
    config = _scenario_config(args)
    train_instances = experiments.make_instances(config, args.train_instances, args.seed)
    eval_instances = experiments.build_eval_instances(config, args.eval_instances, args.seed)
    tconfig = marl.TrainConfig(
        episodes=args.episodes,
        variant=args.variant,
        alpha=args.alpha,
        fleets=_parse_fleets(args.fleet) if args.fleet else None,
        imitation=_parse_imitation(args.imitate),
        eval_period=args.eval_period,
    )
    experiments.emit_resolved_config(
        args.out,
        {"command": "train", "scenario": config, "train": tconfig, "seed": args.seed,
         "train_instances": args.train_instances, "eval_instances": args.eval_instances},
    )

    def progress(row):
        if row["episode"] % args.log_period == 0 or row["eval_score"] != "":
            print(
                f"episode {row['episode']}: train {row['train_score']:.3f}"
                + (f" eval {row['eval_score']:.3f}" if row["eval_score"] != "" else "")
                + f" vloss {row['value_loss']:.4f} H {row['mean_entropy']:.3f}",
                flush=True,
            )

    result = marl.train(
        tconfig,
        train_instances,
        eval_instances,
        seed=args.seed,
        out_dir=args.out,
        progress=progress,
    )
    print(f"final eval: {result.final_eval.get('score', float('nan')):.4f}")
    for tag, rev in result.final_eval.get("fleet_revenue", {}).items():
        print(f"  fleet {tag}: mean revenue {rev:.2f}")
    return 0


def cmd_eval(args) -> int:
    config = _scenario_config(args)
    policy = marl.load_policy(args.checkpoint, mode="greedy")
    instances = experiments.build_eval_instances(config, args.instances, args.seed)
    rows = []
    for k, instance in enumerate(instances):
        seed = experiments.derive_seed(args.seed, "eval-episode", config.name, k)
        result = run_episode(instance, policy, seed=seed, couriers=default_couriers(instance))
        rows.append((k, result.score))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "eval.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["instance", "score"])
        for k, score in rows:
            writer.writerow([k, f"{score:.8f}"])
        writer.writerow(["mean", f"{np.mean([s for _, s in rows]):.8f}"])
    experiments.emit_resolved_config(
        args.out,
        {"command": "eval", "scenario": config, "checkpoint": args.checkpoint,
         "instances": args.instances, "seed": args.seed},
    )
    print(f"mean score over {len(rows)} instances: {np.mean([s for _, s in rows]):.4f}")
    return 0


def cmd_export(args) -> int:
    config = _scenario_config(args)
    instance = experiments.make_instances(config, 1, args.seed)[0]
    checkpoints = _parse_checkpoints(args.checkpoint)
    results = {}
    for name in args.policy.split(","):
        policy = experiments.resolve_policy(name, checkpoints)
        seed = experiments.derive_seed(args.seed, "export-episode", config.name, name)
        results[name] = run_episode(
            instance, policy, seed=seed, couriers=default_couriers(instance)
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = experiments.export_trajectories(results, instance, out / "trajectories")
    experiments.emit_resolved_config(
        args.out,
        {"command": "export", "scenario": config, "policies": args.policy, "seed": args.seed},
    )
    print(f"wrote {paths['json']}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="courierlab",
        description="Courier dispatching simulation lab: demand generation, "
        "dispatch policies, training, and benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    scenario_names = ",".join(sorted(PRESETS))

    p = sub.add_parser("gen", help="generate problem instances")
    p.add_argument("--scenario", default="base", help=f"one of: {scenario_names}")
    p.add_argument("--instances", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file overriding scenario fields")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("bench", help="score policies over scenarios")
    p.add_argument("--scenario", default="base", help="comma-separated preset names")
    p.add_argument("--policy", default="random,ghav,ghep,mbm", help="comma-separated policies")
    p.add_argument("--instances", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", action="append", help="[policy=]path, repeatable")
    p.add_argument("--config", help="JSON file overriding scenario fields")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("train", help="train the learned dispatcher")
    p.add_argument("--scenario", default="desk")
    p.add_argument("--episodes", type=int, default=1500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", choices=["basic", "ep"], default="basic")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--train-instances", type=int, default=40)
    p.add_argument("--eval-instances", type=int, default=10)
    p.add_argument("--eval-period", type=int, default=50)
    p.add_argument("--log-period", type=int, default=25)
    p.add_argument("--fleet", help="policy:count[:learner], comma-separated")
    p.add_argument("--imitate", default="none", help="none | full:E | mixed:E[:p]")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file overriding scenario fields")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on fresh instances")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenario", default="desk")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file overriding scenario fields")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("export", help="export trajectories + demand heat for plotting")
    p.add_argument("--scenario", default="base")
    p.add_argument("--policy", default="random,ghav,ghep,mbm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", action="append", help="[policy=]path, repeatable")
    p.add_argument("--config", help="JSON file overriding scenario fields")
    p.set_defaults(fn=cmd_export)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
