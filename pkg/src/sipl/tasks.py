"""Task parameters and grid geometry for the two-agent Tiger-grid domain.

A task is an N x N occupancy grid (0 = free, 1 = obstacle) with a single
gold cell. Two agents move on the free cells with noisy motion, receive a
5-bit local observation, and are coupled only when they come within a
Manhattan-distance interaction radius of each other.

Conventions relied on by every other module:

* Actions: 0=North, 1=East, 2=South, 3=West, 4=Listen, 5=Open.
* Motion: a move toward a free neighbour lands there with
  ``move_success_prob`` and otherwise stays; moves into obstacles or off
  the border always stay; Listen and Open never move the agent.
* Observation code: ``bN<<4 | bE<<3 | bS<<2 | bW<<1 | glitter``. A
  direction bit is 1 when the adjacent cell is blocked (obstacle or
  border); glitter is 1 when the agent sits on the gold cell. Each bit is
  flipped independently with ``obs_noise_listen`` after Listen and
  ``obs_noise_move`` after any other action.
* Task JSON schema (strict, unknown fields rejected)::

    {"n": int, "grid": [[0|1, ...], ...], "gold": [r, c],
     "init_i": [[r, c], ...], "init_j": [[r, c], ...],
     "gamma": float, "move_success_prob": float,
     "obs_noise_move": float, "obs_noise_listen": float,
     "interaction_radius": int,
     "rewards": {"step", "open_gold", "open_wrong", "collision",
                 "shared_gold"}}
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

NORTH, EAST, SOUTH, WEST, LISTEN, OPEN = range(6)
NUM_ACTIONS = 6
NUM_OBS = 32
ACTION_NAMES = ("north", "east", "south", "west", "listen", "open")
MOVE_DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))  # N, E, S, W

Cell = tuple[int, int]


class TaskError(ValueError):
    """Malformed task parameters or task JSON."""


@dataclass(frozen=True)
class RewardParams:
    step: float = -0.1
    open_gold: float = 10.0
    open_wrong: float = -10.0
    collision: float = -5.0
    shared_gold: float = 5.0


@dataclass(frozen=True)
class TaskParameter:
    """Everything identifying one task instance.

    ``cells`` is row-major occupancy, 0 = free, 1 = obstacle. Supports and
    the gold cell are (row, col) coordinates of free cells.
    """

    grid_size: int
    cells: tuple[tuple[int, ...], ...]
    gold_cell: Cell
    init_support_i: tuple[Cell, ...]
    init_support_j: tuple[Cell, ...]
    gamma: float = 0.95
    move_success_prob: float = 0.9
    obs_noise_move: float = 0.1
    obs_noise_listen: float = 0.02
    interaction_radius: int = 1
    rewards: RewardParams = RewardParams()

    def validate(self) -> None:
        n = self.grid_size
        if not isinstance(n, int) or n < 1:
            raise TaskError(f"grid_size must be a positive integer, got {n!r}")
        if len(self.cells) != n or any(len(row) != n for row in self.cells):
            raise TaskError("grid must be N x N")
        for row in self.cells:
            for v in row:
                if v not in (0, 1):
                    raise TaskError(f"grid entries must be 0 or 1, got {v!r}")
        if not 0.0 < self.gamma < 1.0:
            raise TaskError(f"gamma must lie in (0, 1), got {self.gamma}")
        for name in ("move_success_prob", "obs_noise_move", "obs_noise_listen"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise TaskError(f"{name} must lie in [0, 1], got {v}")
        if not isinstance(self.interaction_radius, int) or self.interaction_radius < 0:
            raise TaskError("interaction_radius must be a nonnegative integer")
        if not self._free(self.gold_cell):
            raise TaskError(f"gold cell {self.gold_cell} is not a free cell")
        for tag, support in (("init_i", self.init_support_i), ("init_j", self.init_support_j)):
            if len(support) == 0:
                raise TaskError(f"{tag} must be nonempty")
            if len(set(support)) != len(support):
                raise TaskError(f"{tag} contains duplicate cells")
            for c in support:
                if not self._free(c):
                    raise TaskError(f"{tag} cell {c} is not a free cell")
        for name, v in vars(self.rewards).items():
            if not np.isfinite(v):
                raise TaskError(f"reward {name} must be finite")

    def _free(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.grid_size and 0 <= c < self.grid_size and self.cells[r][c] == 0

    def to_json_dict(self) -> dict:
        return {
            "n": self.grid_size,
            "grid": [list(row) for row in self.cells],
            "gold": list(self.gold_cell),
            "init_i": [list(c) for c in self.init_support_i],
            "init_j": [list(c) for c in self.init_support_j],
            "gamma": self.gamma,
            "move_success_prob": self.move_success_prob,
            "obs_noise_move": self.obs_noise_move,
            "obs_noise_listen": self.obs_noise_listen,
            "interaction_radius": self.interaction_radius,
            "rewards": vars(self.rewards).copy(),
        }


_TASK_KEYS = {
    "n", "grid", "gold", "init_i", "init_j", "gamma", "move_success_prob",
    "obs_noise_move", "obs_noise_listen", "interaction_radius", "rewards",
}
_REWARD_KEYS = {"step", "open_gold", "open_wrong", "collision", "shared_gold"}


def _cell_from_json(v, what: str) -> Cell:
    if not (isinstance(v, (list, tuple)) and len(v) == 2
            and all(isinstance(x, int) for x in v)):
        raise TaskError(f"{what} must be a [row, col] pair of integers, got {v!r}")
    return (v[0], v[1])


def task_from_json_dict(data: dict) -> TaskParameter:
    if not isinstance(data, dict):
        raise TaskError("task JSON must be an object")
    unknown = set(data) - _TASK_KEYS
    if unknown:
        raise TaskError(f"unknown task fields: {sorted(unknown)}")
    missing = _TASK_KEYS - set(data)
    if missing:
        raise TaskError(f"missing task fields: {sorted(missing)}")
    rew = data["rewards"]
    if not isinstance(rew, dict):
        raise TaskError("rewards must be an object")
    if set(rew) != _REWARD_KEYS:
        raise TaskError(f"rewards must have exactly the fields {sorted(_REWARD_KEYS)}")
    try:
        grid = tuple(tuple(int(v) for v in row) for row in data["grid"])
    except (TypeError, ValueError) as exc:
        raise TaskError(f"grid is not an array of 0/1 rows: {exc}") from None
    task = TaskParameter(
        grid_size=data["n"],
        cells=grid,
        gold_cell=_cell_from_json(data["gold"], "gold"),
        init_support_i=tuple(_cell_from_json(c, "init_i entry") for c in data["init_i"]),
        init_support_j=tuple(_cell_from_json(c, "init_j entry") for c in data["init_j"]),
        gamma=float(data["gamma"]),
        move_success_prob=float(data["move_success_prob"]),
        obs_noise_move=float(data["obs_noise_move"]),
        obs_noise_listen=float(data["obs_noise_listen"]),
        interaction_radius=data["interaction_radius"],
        rewards=RewardParams(**{k: float(v) for k, v in rew.items()}),
    )
    task.validate()
    return task


def load_task(path: str | Path) -> TaskParameter:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TaskError(f"{path}: invalid JSON: {exc}") from None
    return task_from_json_dict(data)


def save_task(task: TaskParameter, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(task.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True, eq=False)
class GridGeometry:
    """Free-cell indexing and per-cell motion/observation lookups.

    Cell ids enumerate the free cells in row-major order; all model and
    belief tables in the package are indexed by these ids.
    """

    size: int
    free_cells: tuple[Cell, ...]
    cell_index: dict[Cell, int]
    gold_id: int
    move_target: np.ndarray  # [nF, 4] i32; id after a successful move (self if blocked)
    blocked: np.ndarray      # [nF, 4] u8; 1 where the neighbour is obstacle/border
    obs_code: np.ndarray     # [nF] i32; noiseless observation code per cell

    @property
    def n_free(self) -> int:
        return len(self.free_cells)

    @property
    def n_joint(self) -> int:
        return len(self.free_cells) ** 2

    def joint_id(self, si: int, sj: int) -> int:
        return si * self.n_free + sj

    def split_joint(self, s: int) -> tuple[int, int]:
        return divmod(s, self.n_free)


def observation_code(bits) -> int:
    """Pack (N, E, S, W, glitter) bits into an integer in [0, 32)."""
    b = list(bits)
    return (b[0] << 4) | (b[1] << 3) | (b[2] << 2) | (b[3] << 1) | b[4]


def observation_bits(code: int) -> tuple[int, int, int, int, int]:
    return ((code >> 4) & 1, (code >> 3) & 1, (code >> 2) & 1, (code >> 1) & 1, code & 1)


def grid_geometry(task: TaskParameter) -> GridGeometry:
    task.validate()
    n = task.grid_size
    free = [(r, c) for r in range(n) for c in range(n) if task.cells[r][c] == 0]
    index = {cell: k for k, cell in enumerate(free)}
    nf = len(free)
    move_target = np.zeros((nf, 4), dtype=np.int32)
    blocked = np.zeros((nf, 4), dtype=np.uint8)
    obs_code = np.zeros(nf, dtype=np.int32)
    gold_id = index[task.gold_cell]
    for k, (r, c) in enumerate(free):
        bits = []
        for d, (dr, dc) in enumerate(MOVE_DELTAS):
            nb = (r + dr, c + dc)
            if nb in index:
                move_target[k, d] = index[nb]
                bits.append(0)
            else:
                move_target[k, d] = k
                blocked[k, d] = 1
                bits.append(1)
        bits.append(1 if k == gold_id else 0)
        obs_code[k] = observation_code(bits)
    move_target.flags.writeable = False
    blocked.flags.writeable = False
    obs_code.flags.writeable = False
    return GridGeometry(
        size=n, free_cells=tuple(free), cell_index=index, gold_id=gold_id,
        move_target=move_target, blocked=blocked, obs_code=obs_code,
    )


def reachable_from(geom: GridGeometry, start_id: int) -> np.ndarray:
    """Boolean mask of free cells connected to ``start_id`` (4-neighbourhood)."""
    seen = np.zeros(geom.n_free, dtype=bool)
    seen[start_id] = True
    queue = deque([start_id])
    while queue:
        k = queue.popleft()
        for d in range(4):
            nb = int(geom.move_target[k, d])
            if nb != k and not seen[nb]:
                seen[nb] = True
                queue.append(nb)
    return seen


def manhattan_matrix(geom: GridGeometry) -> np.ndarray:
    """Pairwise Manhattan distances between free cells, [nF, nF]."""
    coords = np.asarray(geom.free_cells, dtype=np.int64)
    return np.abs(coords[:, None, :] - coords[None, :, :]).sum(axis=2)


__all__ = [
    "NORTH", "EAST", "SOUTH", "WEST", "LISTEN", "OPEN",
    "NUM_ACTIONS", "NUM_OBS", "ACTION_NAMES", "MOVE_DELTAS",
    "TaskError", "RewardParams", "TaskParameter", "GridGeometry",
    "task_from_json_dict", "load_task", "save_task",
    "grid_geometry", "reachable_from", "manhattan_matrix",
    "observation_code", "observation_bits", "replace",
]
