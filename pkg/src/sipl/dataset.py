"""Expert demonstration datasets and policy evaluation metrics.

An episode is simulated with the acting policy for agent i and a sampled
strategy for agent j; every step records the executed joint action, the
observation, and the label an expert would choose next given the filtered
belief. Datasets are directories: ``manifest.json`` plus one binary array
file per array (see ``arrayio``), with episodes padded to the longest
length and -1 as the padding code.
"""

from __future__ import annotations

import json
import math
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import arrayio
from .belief import Belief, initial_belief, update
from .env import EpisodeState, TigerGridSim, derive_rng
from .model import FactoredModel, InteractionIndicator, build_model
from .planner import action_values, plan, select_action
from .solver import MixedStrategy, NestedSpec, QFunction, solve_nested
from .tasks import NUM_ACTIONS, TaskParameter, save_task

PAD = -1


def worker_count() -> int:
    """Parallelism cap: SIPL_THREADS if set, else the machine's cores."""
    env = os.environ.get("SIPL_THREADS", "").strip()
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("SIPL_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True, eq=False)
class ExpertSolution:
    """Per-task solve products shared by every episode of the task."""

    task: TaskParameter
    model: FactoredModel
    X: InteractionIndicator
    pi_hat_j: MixedStrategy
    q: QFunction


def solve_expert(task: TaskParameter, spec: NestedSpec | None = None,
                 model: FactoredModel | None = None) -> ExpertSolution:
    if model is None:
        model = build_model(task)
    if spec is None:
        spec = NestedSpec.for_task(task)
    X = model.indicator
    pi_hat_j = solve_nested(task, spec, model=model, X=X)
    q = plan(task, pi_hat_j, spec.horizon, model=model, X=X)
    return ExpertSolution(task=task, model=model, X=X, pi_hat_j=pi_hat_j, q=q)


class ExpertPolicy:
    """Greedy belief-weighted planner; also serves as the label oracle."""

    def __init__(self, solution: ExpertSolution):
        self.solution = solution
        self.belief: Belief = initial_belief(solution.task, solution.model)

    def reset(self) -> None:
        self.belief = initial_belief(self.solution.task, self.solution.model)

    def greedy_action(self) -> int:
        av = action_values(self.solution.q, self.belief, self.solution.pi_hat_j)
        return select_action(av, mode="argmax")

    def act(self, rng: np.random.Generator) -> int:
        return self.greedy_action()

    def observe(self, a: tuple[int, int], o_i: int) -> None:
        s = self.solution
        self.belief = update(self.belief, s.model, s.X, a[0], o_i, a_j=a[1])


class RandomPolicy:
    """Uniform over the six actions; no internal state."""

    def reset(self) -> None:
        pass

    def act(self, rng: np.random.Generator) -> int:
        return int(rng.integers(NUM_ACTIONS))

    def observe(self, a: tuple[int, int], o_i: int) -> None:
        pass


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    task_index: int
    actions_i: np.ndarray      # [L] i32
    actions_j: np.ndarray      # [L] i32
    observations: np.ndarray   # [L] i32
    expert_actions: np.ndarray | None  # [L] i32 labels, None when unlabeled
    length: int
    success: bool
    return_i: float
    beliefs: np.ndarray | None = None  # [L + 1, nJ] pre-action beliefs


def simulate_episode(task: TaskParameter, policy, strategy_j: MixedStrategy,
                     seed, max_steps: int | None = None,
                     model: FactoredModel | None = None,
                     X: InteractionIndicator | None = None,
                     labeler: ExpertPolicy | None = None,
                     task_index: int = 0,
                     record_beliefs: bool = False) -> TrajectoryRecord:
    """Run one episode; ``seed`` is an int or a tuple fed to derive_rng."""
    sim = TigerGridSim(task, model=model, X=X, max_steps=max_steps)
    rng = derive_rng(*seed) if isinstance(seed, tuple) else derive_rng(seed)
    if labeler is None and isinstance(policy, ExpertPolicy):
        labeler = policy
    dual = labeler is not None and labeler is not policy

    policy.reset()
    if dual:
        labeler.reset()
    es = sim.reset(rng)
    acts_i, acts_j, obs, labels, beliefs = [], [], [], [], []
    while not es.done:
        if record_beliefs and labeler is not None:
            beliefs.append(labeler.belief.probs)
        a_i = policy.act(rng)
        a_j = int(rng.choice(NUM_ACTIONS,
                             p=strategy_j.probs[es.state[0] * sim.model.n_free + es.state[1]]))
        es = sim.step(es, (a_i, a_j), rng)
        o = sim.observe(es.state, a_i, rng)
        policy.observe((a_i, a_j), o)
        if dual:
            labeler.observe((a_i, a_j), o)
        acts_i.append(a_i)
        acts_j.append(a_j)
        obs.append(o)
        if labeler is not None:
            labels.append(labeler.greedy_action())
    if record_beliefs and labeler is not None:
        beliefs.append(labeler.belief.probs)
    return TrajectoryRecord(
        task_index=task_index,
        actions_i=np.asarray(acts_i, dtype=np.int32),
        actions_j=np.asarray(acts_j, dtype=np.int32),
        observations=np.asarray(obs, dtype=np.int32),
        expert_actions=np.asarray(labels, dtype=np.int32) if labeler is not None else None,
        length=len(acts_i), success=es.success, return_i=es.return_i,
        beliefs=np.asarray(beliefs) if record_beliefs and beliefs else None,
    )


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    tasks: tuple[str, ...]
    splits: dict
    arrays: tuple[dict, ...]
    seeds: dict
    env_defaults: dict

    def to_json_dict(self) -> dict:
        return {
            "version": self.version,
            "tasks": list(self.tasks),
            "splits": self.splits,
            "arrays": [dict(a) for a in self.arrays],
            "seeds": self.seeds,
            "env_defaults": self.env_defaults,
        }


def split_task_indices(n_tasks: int, fractions: tuple[float, float, float]) -> dict:
    """Contiguous disjoint train/valid/test index lists by task."""
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must be nonnegative and sum to 1")
    n_valid = int(math.floor(n_tasks * fractions[1]))
    n_test = int(math.floor(n_tasks * fractions[2]))
    n_train = n_tasks - n_valid - n_test
    idx = list(range(n_tasks))
    return {"train": idx[:n_train],
            "valid": idx[n_train:n_train + n_valid],
            "test": idx[n_train + n_valid:]}


def _pad_stack(rows: list[np.ndarray], max_len: int, fill) -> np.ndarray:
    out = np.full((len(rows), max_len), fill, dtype=rows[0].dtype)
    for k, row in enumerate(rows):
        out[k, :row.shape[0]] = row
    return out


def build_dataset(tasks: list[TaskParameter], episodes_per_task: int,
                  master_seed: int, out_path: str | Path,
                  split: tuple[float, float, float] = (0.8, 0.1, 0.1),
                  max_steps: int | None = None,
                  nested_spec: NestedSpec | None = None,
                  include_beliefs: bool = False) -> DatasetManifest:
    """Simulate expert episodes for every task and write the container."""
    if episodes_per_task < 1:
        raise ValueError("episodes_per_task must be at least 1")
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _build_dataset(tasks, episodes_per_task, master_seed, out, split,
                              max_steps, nested_spec, include_beliefs)
    except BaseException:
        shutil.rmtree(out, ignore_errors=True)
        raise


def _simulate_expert_episode(args) -> TrajectoryRecord:
    sol, t_idx, ep, master_seed, max_steps, include_beliefs = args
    return simulate_episode(
        sol.task, ExpertPolicy(sol), sol.pi_hat_j,
        seed=(master_seed, t_idx, ep), max_steps=max_steps,
        model=sol.model, X=sol.X, task_index=t_idx,
        record_beliefs=include_beliefs)


def _build_dataset(tasks, episodes_per_task, master_seed, out, split,
                   max_steps, nested_spec, include_beliefs) -> DatasetManifest:
    solutions = [solve_expert(t, nested_spec) for t in tasks]
    jobs = [(sol, t_idx, ep, master_seed, max_steps, include_beliefs)
            for t_idx, sol in enumerate(solutions)
            for ep in range(episodes_per_task)]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_simulate_expert_episode, jobs))
    else:
        records = [_simulate_expert_episode(j) for j in jobs]

    max_len = max(r.length for r in records)
    arrays: dict[str, np.ndarray] = {
        "actions_i": _pad_stack([r.actions_i for r in records], max_len, PAD),
        "actions_j": _pad_stack([r.actions_j for r in records], max_len, PAD),
        "observations": _pad_stack([r.observations for r in records], max_len, PAD),
        "expert_actions": _pad_stack([r.expert_actions for r in records], max_len, PAD),
        "lengths": np.asarray([r.length for r in records], dtype=np.int32),
        "task_index": np.asarray([r.task_index for r in records], dtype=np.int32),
        "returns_i": np.asarray([r.return_i for r in records], dtype=np.float64),
        "success": np.asarray([r.success for r in records], dtype=np.uint8),
    }
    if include_beliefs:
        # beliefs are stored over full-grid cells (row-major, obstacles zero)
        # so that every record has the same width regardless of free-cell count
        if len({t.grid_size for t in tasks}) != 1:
            raise ValueError("include_beliefs needs tasks of one grid size")
        n_sq = tasks[0].grid_size ** 2
        bel = np.zeros((len(records), max_len + 1, n_sq * n_sq))
        for k, r in enumerate(records):
            geom = solutions[r.task_index].model.geom
            cell_flat = np.array([rr * geom.size + cc for rr, cc in geom.free_cells])
            grid_ids = (cell_flat[:, None] * n_sq + cell_flat[None, :]).ravel()
            bel[k, :r.beliefs.shape[0], grid_ids] = r.beliefs.T
        arrays["beliefs"] = bel

    task_dir = out / "tasks"
    task_dir.mkdir(exist_ok=True)
    width = max(4, len(str(len(tasks) - 1)))
    task_files = []
    for t_idx, task in enumerate(tasks):
        rel = f"tasks/{t_idx:0{width}d}.json"
        save_task(task, out / rel)
        task_files.append(rel)

    entries = []
    for name in sorted(arrays):
        fname = f"{name}.bin"
        arrayio.save_arrays(out / fname, [arrays[name]])
        entries.append({"name": name, "file": fname,
                        "dtype": arrayio.dtype_name(arrays[name]),
                        "shape": list(arrays[name].shape)})

    spec = nested_spec if nested_spec is not None else NestedSpec.for_task(tasks[0])
    manifest = DatasetManifest(
        version=1,
        tasks=tuple(task_files),
        splits=split_task_indices(len(tasks), split),
        arrays=tuple(entries),
        seeds={"master": master_seed, "episodes_per_task": episodes_per_task,
               "stream": "SeedSequence((master, task_index, episode_index))"},
        env_defaults={
            "max_steps": max_steps if max_steps is not None else 4 * tasks[0].grid_size,
            "plan_horizon": spec.horizon, "top_level": spec.top_level,
            "level_dist": list(spec.level_dist),
            "softmax_temperature": spec.softmax_temperature,
            "pad_value": PAD,
        },
    )
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_dataset(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a dataset directory back: (manifest dict, arrays by name)."""
    root = Path(path)
    with open(root / "manifest.json", "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    arrays = {}
    for entry in manifest["arrays"]:
        recs = arrayio.load_arrays(root / entry["file"])
        if len(recs) != 1 or list(recs[0].shape) != entry["shape"]:
            raise arrayio.ContainerError(f"array {entry['name']} does not match manifest")
        arrays[entry["name"]] = recs[0]
    return manifest, arrays


@dataclass(frozen=True)
class Metrics:
    success_rate: float
    mean_return: float
    sem_return: float
    mean_length: float
    action_accuracy: float | None
    episodes: int
    per_task: tuple[dict, ...] = field(default_factory=tuple)

    def to_json_dict(self) -> dict:
        return {
            "success_rate": self.success_rate,
            "mean_return": self.mean_return,
            "sem_return": self.sem_return,
            "mean_episode_length": self.mean_length,
            "action_accuracy": self.action_accuracy,
            "episodes": self.episodes,
            "per_task": [dict(d) for d in self.per_task],
        }


def metrics_from_records(records: list[TrajectoryRecord]) -> Metrics:
    if not records:
        raise ValueError("no records to aggregate")
    returns = np.asarray([r.return_i for r in records])
    succ = np.asarray([r.success for r in records], dtype=float)
    lengths = np.asarray([r.length for r in records], dtype=float)
    labelled = [r for r in records if r.expert_actions is not None and r.length > 1]
    accuracy = None
    if labelled:
        hits = total = 0
        for r in labelled:
            hits += int((r.actions_i[1:] == r.expert_actions[:-1]).sum())
            total += r.length - 1
        accuracy = hits / total if total else None
    per_task = []
    for t_idx in sorted({r.task_index for r in records}):
        sel = [r for r in records if r.task_index == t_idx]
        per_task.append({
            "task": t_idx,
            "episodes": len(sel),
            "success_rate": float(np.mean([r.success for r in sel])),
            "mean_return": float(np.mean([r.return_i for r in sel])),
        })
    sem = float(returns.std(ddof=1) / np.sqrt(len(returns))) if len(returns) > 1 else 0.0
    return Metrics(
        success_rate=float(succ.mean()), mean_return=float(returns.mean()),
        sem_return=sem, mean_length=float(lengths.mean()),
        action_accuracy=accuracy, episodes=len(records),
        per_task=tuple(per_task),
    )


def evaluate_policy(tasks: list[TaskParameter], policy: str, episodes: int,
                    seed: int, max_steps: int | None = None,
                    nested_spec: NestedSpec | None = None) -> Metrics:
    """Aggregate seeded episodes of a named policy ('expert' or 'random')."""
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    if policy not in ("expert", "random"):
        raise ValueError(f"policy must be 'expert' or 'random', got {policy!r}")
    records = []
    for t_idx, task in enumerate(tasks):
        sol = solve_expert(task, nested_spec)
        for ep in range(episodes):
            pol = ExpertPolicy(sol) if policy == "expert" else RandomPolicy()
            records.append(simulate_episode(
                task, pol, sol.pi_hat_j, seed=(seed, t_idx, ep),
                max_steps=max_steps, model=sol.model, X=sol.X, task_index=t_idx))
    return metrics_from_records(records)


__all__ = [
    "PAD", "worker_count", "ExpertSolution", "solve_expert", "ExpertPolicy",
    "RandomPolicy", "TrajectoryRecord", "simulate_episode", "DatasetManifest",
    "split_task_indices", "build_dataset", "load_dataset", "Metrics",
    "metrics_from_records", "evaluate_policy",
]
