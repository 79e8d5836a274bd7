"""Random Tiger-grid task generation and ground-truth episode simulation.

Generated tasks are guaranteed to have every init-support cell of both
agents connected to the gold cell through free space. Episode dynamics
sample from exactly the tables the planner consumes: single-agent rows
when the pair is non-interactive, the interactive joint rows otherwise.

Randomness: every consumer derives an independent, reproducible stream
with ``derive_rng(master_seed, *ints)``; episode streams use
(master seed, task index, episode index).
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .model import FactoredModel, InteractionIndicator, build_model, compose_reward
from .tasks import LISTEN, OPEN, TaskParameter, grid_geometry, reachable_from


class GenerationExhausted(RuntimeError):
    """Too many rejected samples; the density is too high for the grid size."""


class StepAfterDone(RuntimeError):
    """step() called on a finished episode."""


MAX_GENERATION_ATTEMPTS = 1000


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for a (seed, key...) tuple."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, *key)))


@dataclass(frozen=True)
class GridSpec:
    """A generated task plus its generation metadata."""

    task: TaskParameter
    seed: int
    obstacle_density: float
    index: int


def _sample_task(rng: np.random.Generator, n: int, obstacle_density: float,
                 belief_support_size: int, defaults: dict) -> TaskParameter | None:
    cells = (rng.random((n, n)) < obstacle_density).astype(int)
    free = [(r, c) for r in range(n) for c in range(n) if cells[r][c] == 0]
    if len(free) < max(belief_support_size, 1) + 1:
        return None
    gold = free[int(rng.integers(len(free)))]
    task_grid = tuple(tuple(int(v) for v in row) for row in cells)
    probe = TaskParameter(grid_size=n, cells=task_grid, gold_cell=gold,
                          init_support_i=(gold,), init_support_j=(gold,), **defaults)
    geom = grid_geometry(probe)
    reach = np.flatnonzero(reachable_from(geom, geom.gold_id))
    if reach.shape[0] < belief_support_size:
        return None
    support_i = rng.choice(reach, size=belief_support_size, replace=False)
    support_j = rng.choice(reach, size=belief_support_size, replace=False)
    to_cells = lambda ids: tuple(sorted(geom.free_cells[k] for k in ids))
    return dc_replace(probe, init_support_i=to_cells(support_i),
                      init_support_j=to_cells(support_j))


def generate(seed: int, n: int, count: int, obstacle_density: float,
             belief_support_size: int = 3, **task_defaults) -> list[GridSpec]:
    """Deterministically sample ``count`` connectivity-valid tasks.

    ``task_defaults`` override TaskParameter fields such as gamma or
    move_success_prob for every generated task.
    """
    if not 0.0 <= obstacle_density <= 0.35:
        raise ValueError("obstacle_density must lie in [0, 0.35]")
    if n < 3:
        raise ValueError("grid size must be at least 3")
    if belief_support_size < 1:
        raise ValueError("belief_support_size must be at least 1")
    rng = derive_rng(seed, n)
    specs: list[GridSpec] = []
    for idx in range(count):
        task = None
        for _ in range(MAX_GENERATION_ATTEMPTS):
            task = _sample_task(rng, n, obstacle_density, belief_support_size,
                                task_defaults)
            if task is not None:
                break
        if task is None:
            raise GenerationExhausted(
                f"{MAX_GENERATION_ATTEMPTS} rejected samples for task {idx} "
                f"(n={n}, density={obstacle_density})")
        task.validate()
        specs.append(GridSpec(task=task, seed=seed,
                              obstacle_density=obstacle_density, index=idx))
    return specs


@dataclass(frozen=True)
class EpisodeState:
    state: tuple[int, int]  # (si, sj) free-cell ids
    t: int
    return_i: float
    return_j: float
    done: bool
    opened: bool
    success: bool


class TigerGridSim:
    """Samples ground-truth episode dynamics for one task.

    Holds only immutable tables; per-episode state lives in EpisodeState,
    so one simulator instance can serve concurrent episodes.
    """

    def __init__(self, task: TaskParameter, model: FactoredModel | None = None,
                 X: InteractionIndicator | None = None, max_steps: int | None = None):
        self.task = task
        self.model = model if model is not None else build_model(task)
        self.X = X if X is not None else self.model.indicator
        self.max_steps = max_steps if max_steps is not None else 4 * task.grid_size
        geom = self.model.geom
        self._support_i = np.array([geom.cell_index[c] for c in task.init_support_i])
        self._support_j = np.array([geom.cell_index[c] for c in task.init_support_j])

    def reset(self, rng: np.random.Generator) -> EpisodeState:
        si = int(rng.choice(self._support_i))
        sj = int(rng.choice(self._support_j))
        return EpisodeState(state=(si, sj), t=0, return_i=0.0, return_j=0.0,
                            done=False, opened=False, success=False)

    def _sample_next(self, s: tuple[int, int], a: tuple[int, int],
                     rng: np.random.Generator) -> tuple[int, int]:
        si, sj = s
        ai, aj = a
        m = self.model
        if self.X((si, sj), a):
            sid = si * m.n_free + sj
            k = int(rng.choice(4, p=m.int_prob[sid, ai, aj]))
            nxt = int(m.int_succ[sid, ai, aj, k])
            return divmod(nxt, m.n_free)
        ni = int(rng.choice(m.n_free, p=m.t_i[si, ai]))
        nj = int(rng.choice(m.n_free, p=m.t_j[sj, aj]))
        return (ni, nj)

    def step(self, es: EpisodeState, a: tuple[int, int],
             rng: np.random.Generator) -> EpisodeState:
        if es.done:
            raise StepAfterDone(f"episode already finished at t={es.t}")
        ai, _ = a
        disc = self.task.gamma ** es.t
        r_i = compose_reward(self.model, self.X, es.state, a, "i")
        r_j = compose_reward(self.model, self.X, es.state, a, "j")
        nxt = self._sample_next(es.state, a, rng)
        opened = ai == OPEN
        success = opened and es.state[0] == self.model.geom.gold_id
        done = opened or es.t + 1 >= self.max_steps
        return EpisodeState(
            state=nxt, t=es.t + 1,
            return_i=es.return_i + disc * r_i,
            return_j=es.return_j + disc * r_j,
            done=done, opened=es.opened or opened,
            success=es.success or success,
        )

    def observe(self, state: tuple[int, int], a_i: int,
                rng: np.random.Generator) -> int:
        """Sample the 5-bit observation at the post-transition state."""
        geom = self.model.geom
        eps = (self.task.obs_noise_listen if a_i == LISTEN else self.task.obs_noise_move)
        code = int(geom.obs_code[state[0]])
        flips = rng.random(5) < eps
        for b in range(5):
            if flips[b]:
                code ^= 1 << (4 - b)
        return code


__all__ = [
    "GenerationExhausted", "StepAfterDone", "MAX_GENERATION_ATTEMPTS",
    "derive_rng", "GridSpec", "generate", "EpisodeState", "TigerGridSim",
]
