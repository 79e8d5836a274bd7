"""Command-line entry point for the full pipeline.

Subcommands: gen-tasks, solve, simulate, gen-dataset, evaluate, check.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import arrayio
from .dataset import (
    ExpertPolicy, RandomPolicy, build_dataset, evaluate_policy,
    metrics_from_records, simulate_episode, solve_expert,
)
from .env import generate
from .model import build_model, validate_model
from .solver import NestedSpec, solve_nested
from .planner import plan
from .tasks import TaskError, load_task, save_task


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_task_dir(path: str) -> tuple[list, list[str]]:
    root = Path(path)
    if root.is_file():
        return [load_task(root)], [str(root)]
    files = sorted(p for p in root.glob("*.json") if p.name != "index.json")
    if not files:
        raise TaskError(f"no task JSON files under {path}")
    return [load_task(p) for p in files], [str(p) for p in files]


def _cmd_gen_tasks(args) -> int:
    specs = generate(args.seed, args.n, args.count, args.obstacle_density,
                     belief_support_size=args.support_size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(args.count - 1)))
    names = []
    for spec in specs:
        name = f"{spec.index:0{width}d}.json"
        save_task(spec.task, out / name)
        names.append(name)
    _write_json(str(out / "index.json"), {
        "version": 1, "n": args.n, "count": args.count,
        "obstacle_density": args.obstacle_density, "seed": args.seed,
        "support_size": args.support_size, "tasks": names,
    })
    print(f"wrote {len(names)} tasks to {out}")
    return 0


def _cmd_solve(args) -> int:
    task = load_task(args.task)
    model = build_model(task)
    spec = NestedSpec.for_task(task, top_level=args.level)
    if args.horizon is not None:
        spec = NestedSpec(top_level=spec.top_level, level_dist=spec.level_dist,
                          horizon=args.horizon,
                          softmax_temperature=spec.softmax_temperature)
    pi_hat_j = solve_nested(task, spec, model=model)
    q = plan(task, pi_hat_j, spec.horizon, model=model)
    arrayio.save_arrays(args.out, [q.values, pi_hat_j.probs])
    print(f"solved level-{args.level} strategy and horizon-{spec.horizon} "
          f"values for {args.task} -> {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    task = load_task(args.task)
    sol = solve_expert(task)
    records = []
    for ep in range(args.episodes):
        pol = ExpertPolicy(sol) if args.policy == "expert" else RandomPolicy()
        records.append(simulate_episode(
            task, pol, sol.pi_hat_j, seed=(args.seed, 0, ep),
            max_steps=args.max_steps, model=sol.model, X=sol.X))
    metrics = metrics_from_records(records)
    payload = metrics.to_json_dict()
    if args.json_out:
        _write_json(args.json_out, payload)
    print(f"{args.policy}: {args.episodes} episodes  "
          f"success_rate={metrics.success_rate:.3f}  "
          f"mean_return={metrics.mean_return:.3f} (sem {metrics.sem_return:.3f})  "
          f"mean_length={metrics.mean_length:.2f}")
    return 0


def _cmd_gen_dataset(args) -> int:
    fractions = tuple(float(x) for x in args.split.split(","))
    if len(fractions) != 3:
        raise UsageError("--split needs three comma-separated fractions")
    tasks, _ = _load_task_dir(args.tasks)
    manifest = build_dataset(tasks, args.episodes_per_task, args.seed, args.out,
                             split=fractions)
    n_records = manifest.to_json_dict()["arrays"][0]["shape"][0]
    print(f"wrote {n_records} records ({len(tasks)} tasks x "
          f"{args.episodes_per_task} episodes) to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    tasks, _ = _load_task_dir(args.tasks)
    metrics = evaluate_policy(tasks, args.policy, args.episodes, args.seed,
                              max_steps=args.max_steps)
    payload = metrics.to_json_dict()
    if args.json_out:
        _write_json(args.json_out, payload)
    print(f"{args.policy} on {len(tasks)} tasks x {args.episodes} episodes:  "
          f"success_rate={metrics.success_rate:.3f}  "
          f"mean_return={metrics.mean_return:.3f} (sem {metrics.sem_return:.3f})")
    return 0


def _cmd_check(args) -> int:
    task = load_task(args.task)
    model = build_model(task)
    report = validate_model(model)
    payload = {"task": args.task, "ok": report.ok, "issues": list(report.issues)}
    if args.json_out:
        _write_json(args.json_out, payload)
    if report.ok:
        print(f"{args.task}: model OK "
              f"({model.n_free} free cells, {model.n_joint} joint states)")
        return 0
    for issue in report.issues:
        print(f"ISSUE: {issue}")
    return 2


def build_parser() -> _Parser:
    parser = _Parser(prog="sipl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-tasks", help="generate random connectivity-valid tasks")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--obstacle-density", type=float, default=0.25)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--support-size", type=int, default=3)
    p.set_defaults(func=_cmd_gen_tasks)

    p = sub.add_parser("solve", help="solve one task and dump values + strategy")
    p.add_argument("--task", required=True)
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("simulate", help="run seeded episodes on one task")
    p.add_argument("--task", required=True)
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--policy", choices=("expert", "random"), default="expert")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("gen-dataset", help="emit an expert demonstration dataset")
    p.add_argument("--tasks", required=True)
    p.add_argument("--episodes-per-task", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="0.8,0.1,0.1")
    p.set_defaults(func=_cmd_gen_dataset)

    p = sub.add_parser("evaluate", help="aggregate metrics for a policy over tasks")
    p.add_argument("--tasks", required=True)
    p.add_argument("--policy", choices=("expert", "random"), default="expert")
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("check", help="validate a task file and its model")
    p.add_argument("--task", required=True)
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=_cmd_check)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (TaskError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
