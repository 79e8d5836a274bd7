"""Factored two-agent model: single-agent factors plus interactive tables.

All tables are indexed by free-cell ids (see ``tasks.GridGeometry``). A
joint state is ``s = si * nF + sj``; throughout the package it is passed
around either as that flat id or as the ``(si, sj)`` pair. A joint action
is the pair ``(a_i, a_j)``.

The composed transition is the indicator-gated mixture of the product of
single-agent rows and the interactive joint row. Interactive dynamics
follow a same-cell conflict rule: both agents sample a tentative next cell
independently from their single-agent rows, and when the two samples
coincide both moves are cancelled and the agents stay put. Interactive
rewards add the collision penalty weighted by the probability of that
conflict event (a cancelled move, not mere co-location), and replace the
gold payoff by the shared split when both agents open the gold cell
simultaneously.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .tasks import (
    LISTEN, NUM_ACTIONS, NUM_OBS, OPEN, GridGeometry, TaskParameter,
    TaskError, grid_geometry, manhattan_matrix, reachable_from,
)

JointState = tuple[int, int]   # (si, sj) free-cell ids
JointAction = tuple[int, int]  # (a_i, a_j)
Observation = int              # packed 5-bit code in [0, 32)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class InteractionIndicator:
    """Membership test for the interactive joint state-action pairs.

    For task-derived indicators a pair is interactive iff the agents'
    Manhattan distance is at most ``radius``; the action plays no role.
    ``radius is None`` marks the explicit empty indicator used for
    analysis (no nonnegative radius can produce it, since co-located
    pairs are always within any radius).
    """

    radius: int | None
    mask: np.ndarray  # bool [nJ]

    def __call__(self, s, a: JointAction | None = None) -> int:
        if isinstance(s, tuple):
            nf = int(np.sqrt(self.mask.shape[0]))
            s = s[0] * nf + s[1]
        return int(self.mask[s])

    @classmethod
    def from_radius(cls, geom: GridGeometry, radius: int) -> "InteractionIndicator":
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        mask = (manhattan_matrix(geom) <= radius).ravel()
        return cls(radius=radius, mask=_readonly(mask))

    @classmethod
    def all_pairs(cls, geom: GridGeometry) -> "InteractionIndicator":
        return cls.from_radius(geom, 2 * (geom.size - 1))

    @classmethod
    def no_pairs(cls, geom: GridGeometry) -> "InteractionIndicator":
        return cls(radius=None, mask=_readonly(np.zeros(geom.n_joint, dtype=bool)))


@dataclass(frozen=True, eq=False)
class FactoredModel:
    """Single-agent factors, interactive joint tables, and the observation table.

    ``int_succ``/``int_prob`` encode the interactive joint transition as up
    to four (successor id, probability) entries per (s, a_i, a_j); entries
    may repeat a successor with zero probability. They are defined for all
    joint pairs so that any indicator can gate them.
    """

    task: TaskParameter
    geom: GridGeometry
    t_i: np.ndarray       # [nF, A, nF]
    t_j: np.ndarray       # [nF, A, nF]
    r_i: np.ndarray       # [nF, A]
    r_j: np.ndarray       # [nF, A]
    int_succ: np.ndarray  # [nJ, A, A, 4] i32
    int_prob: np.ndarray  # [nJ, A, A, 4]
    r_int_i: np.ndarray   # [nJ, A, A]
    r_int_j: np.ndarray   # [nJ, A, A]
    obs_i: np.ndarray     # [nF, A, 32]
    indicator_t: InteractionIndicator = field(repr=False, default=None)
    indicator_r: InteractionIndicator = field(repr=False, default=None)

    @property
    def n_free(self) -> int:
        return self.geom.n_free

    @property
    def n_joint(self) -> int:
        return self.geom.n_joint

    @property
    def indicator(self) -> InteractionIndicator:
        return self.indicator_t

    def si_of(self) -> np.ndarray:
        return np.arange(self.n_joint) // self.n_free

    def sj_of(self) -> np.ndarray:
        return np.arange(self.n_joint) % self.n_free


def _single_agent_outcomes(geom: GridGeometry, move_success: float):
    """Tentative next-cell outcomes per (cell, action): two (cell, prob) slots."""
    nf = geom.n_free
    out_cell = np.zeros((nf, NUM_ACTIONS, 2), dtype=np.int32)
    out_prob = np.zeros((nf, NUM_ACTIONS, 2))
    cells = np.arange(nf, dtype=np.int32)
    for a in range(NUM_ACTIONS):
        if a < 4:
            tgt = geom.move_target[:, a]
            moved = tgt != cells
            p = np.where(moved, move_success, 1.0)
        else:
            tgt = cells
            p = np.ones(nf)
        out_cell[:, a, 0] = tgt
        out_prob[:, a, 0] = p
        out_cell[:, a, 1] = cells
        out_prob[:, a, 1] = 1.0 - p
    return out_cell, out_prob


def _single_agent_transition(geom: GridGeometry, out_cell, out_prob) -> np.ndarray:
    nf = geom.n_free
    t = np.zeros((nf, NUM_ACTIONS, nf))
    rows = np.repeat(np.arange(nf), NUM_ACTIONS * 2)
    acts = np.tile(np.repeat(np.arange(NUM_ACTIONS), 2), nf)
    np.add.at(t, (rows, acts, out_cell.ravel()), out_prob.ravel())
    return t


def _single_agent_reward(geom: GridGeometry, rew) -> np.ndarray:
    nf = geom.n_free
    r = np.full((nf, NUM_ACTIONS), rew.step)
    r[:, OPEN] = rew.open_wrong
    r[geom.gold_id, OPEN] = rew.open_gold
    return r


def _observation_table(geom: GridGeometry, task: TaskParameter) -> np.ndarray:
    codes = np.arange(NUM_OBS)
    code_bits = ((codes[:, None] >> np.array([4, 3, 2, 1, 0])) & 1)  # [32, 5]
    true_bits = ((geom.obs_code[:, None] >> np.array([4, 3, 2, 1, 0])) & 1)  # [nF, 5]
    mism = np.abs(true_bits[:, None, :] - code_bits[None, :, :]).sum(axis=2)  # [nF, 32]
    obs = np.zeros((geom.n_free, NUM_ACTIONS, NUM_OBS))
    for a in range(NUM_ACTIONS):
        eps = task.obs_noise_listen if a == LISTEN else task.obs_noise_move
        obs[:, a, :] = np.power(eps, mism) * np.power(1.0 - eps, 5 - mism)
    return obs


def _interactive_tables(geom: GridGeometry, task: TaskParameter, out_cell, out_prob):
    """Joint tables under the same-cell conflict rule, for every joint pair."""
    nf = geom.n_free
    rew = task.rewards

    ci = out_cell[:, None, :, None, :, None]      # (si, ., ai, ., ki, .)
    cj = out_cell[None, :, None, :, None, :]      # (., sj, ., aj, ., kj)
    p = out_prob[:, None, :, None, :, None] * out_prob[None, :, None, :, None, :]
    si_grid = np.arange(nf, dtype=np.int32)[:, None, None, None, None, None]
    sj_grid = np.arange(nf, dtype=np.int32)[None, :, None, None, None, None]

    collide = ci == cj
    succ_i = np.where(collide, si_grid, ci)
    succ_j = np.where(collide, sj_grid, cj)
    succ = (succ_i.astype(np.int64) * nf + succ_j).astype(np.int32)
    stayed = (ci == si_grid) & (cj == sj_grid)
    conflict_p = (p * (collide & ~stayed)).sum(axis=(4, 5))  # [nF, nF, A, A]

    nj = nf * nf
    int_succ = succ.reshape(nj, NUM_ACTIONS, NUM_ACTIONS, 4)
    int_prob = p.reshape(nj, NUM_ACTIONS, NUM_ACTIONS, 4)

    r_i = _single_agent_reward(geom, rew)
    r_j = r_i
    base_i = np.broadcast_to(r_i[:, None, :, None],
                             (nf, nf, NUM_ACTIONS, NUM_ACTIONS)).copy()
    base_j = np.broadcast_to(r_j[None, :, None, :],
                             (nf, nf, NUM_ACTIONS, NUM_ACTIONS)).copy()
    g = geom.gold_id
    base_i[g, g, OPEN, OPEN] = rew.shared_gold
    base_j[g, g, OPEN, OPEN] = rew.shared_gold

    r_int_i = (base_i + rew.collision * conflict_p).reshape(nj, NUM_ACTIONS, NUM_ACTIONS)
    r_int_j = (base_j + rew.collision * conflict_p).reshape(nj, NUM_ACTIONS, NUM_ACTIONS)
    return int_succ, int_prob, r_int_i, r_int_j


def build_model(task: TaskParameter) -> FactoredModel:
    """Materialize all model tables for a task. Deterministic in the task."""
    geom = grid_geometry(task)
    reach = reachable_from(geom, geom.gold_id)
    if not any(reach[geom.cell_index[c]] for c in task.init_support_i):
        raise TaskError("gold cell is unreachable from every init-support cell of agent i")

    out_cell, out_prob = _single_agent_outcomes(geom, task.move_success_prob)
    t = _single_agent_transition(geom, out_cell, out_prob)
    r = _single_agent_reward(geom, task.rewards)
    int_succ, int_prob, r_int_i, r_int_j = _interactive_tables(geom, task, out_cell, out_prob)
    obs = _observation_table(geom, task)
    x = InteractionIndicator.from_radius(geom, task.interaction_radius)

    return FactoredModel(
        task=task, geom=geom,
        t_i=_readonly(t), t_j=_readonly(t.copy()),
        r_i=_readonly(r), r_j=_readonly(r.copy()),
        int_succ=_readonly(int_succ), int_prob=_readonly(int_prob),
        r_int_i=_readonly(r_int_i), r_int_j=_readonly(r_int_j),
        obs_i=_readonly(obs), indicator_t=x, indicator_r=x,
    )


def compose_transition(model: FactoredModel, X: InteractionIndicator,
                       s: JointState, a: JointAction, s_next: JointState) -> float:
    """Probability of ``s_next`` under the indicator-gated composed transition."""
    si, sj = s
    ai, aj = a
    if X((si, sj), a):
        sid = si * model.n_free + sj
        nid = s_next[0] * model.n_free + s_next[1]
        hits = model.int_succ[sid, ai, aj] == nid
        return float(model.int_prob[sid, ai, aj][hits].sum())
    return float(model.t_i[si, ai, s_next[0]] * model.t_j[sj, aj, s_next[1]])


def compose_transition_row(model: FactoredModel, X: InteractionIndicator,
                           s: JointState, a: JointAction) -> np.ndarray:
    """Full successor distribution over joint states, [nJ]."""
    si, sj = s
    ai, aj = a
    if X((si, sj), a):
        sid = si * model.n_free + sj
        row = np.zeros(model.n_joint)
        np.add.at(row, model.int_succ[sid, ai, aj], model.int_prob[sid, ai, aj])
        return row
    return np.outer(model.t_i[si, ai], model.t_j[sj, aj]).ravel()


def compose_reward(model: FactoredModel, X: InteractionIndicator,
                   s: JointState, a: JointAction, agent: str) -> float:
    """Immediate reward for ``agent`` ('i' or 'j') at the joint pair (s, a)."""
    si, sj = s
    ai, aj = a
    if agent not in ("i", "j"):
        raise ValueError(f"agent must be 'i' or 'j', got {agent!r}")
    if X((si, sj), a):
        table = model.r_int_i if agent == "i" else model.r_int_j
        return float(table[si * model.n_free + sj, ai, aj])
    if agent == "i":
        return float(model.r_i[si, ai])
    return float(model.r_j[sj, aj])


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.issues


def validate_model(model: FactoredModel, atol: float = 1e-12) -> ValidationReport:
    """Check row sums, nonnegativity, gold reachability, indicator symmetry."""
    issues: list[str] = []
    for name, table in (("t_i", model.t_i), ("t_j", model.t_j)):
        sums = table.sum(axis=-1)
        bad = np.argwhere(np.abs(sums - 1.0) > atol)
        issues += [f"{name} row (cell={c}, action={a}) sums to {sums[c, a]!r}" for c, a in bad]
        if (table < -atol).any():
            issues.append(f"{name} has negative entries")
    sums = model.int_prob.sum(axis=-1)
    for s, ai, aj in np.argwhere(np.abs(sums - 1.0) > atol):
        issues.append(f"interactive row (s={s}, a=({ai},{aj})) sums to {sums[s, ai, aj]!r}")
    if (model.int_prob < -atol).any():
        issues.append("interactive transition has negative entries")
    if (model.int_succ < 0).any() or (model.int_succ >= model.n_joint).any():
        issues.append("interactive successor ids out of range")
    sums = model.obs_i.sum(axis=-1)
    for c, a in np.argwhere(np.abs(sums - 1.0) > atol):
        issues.append(f"obs_i row (cell={c}, action={a}) sums to {sums[c, a]!r}")
    if (model.obs_i < -atol).any():
        issues.append("obs_i has negative entries")
    reach = reachable_from(model.geom, model.geom.gold_id)
    if not any(reach[model.geom.cell_index[c]] for c in model.task.init_support_i):
        issues.append("gold cell unreachable from every init-support cell of agent i")
    if not np.array_equal(model.indicator_t.mask, model.indicator_r.mask):
        issues.append("transition and reward interaction indicators differ")
    return ValidationReport(issues=tuple(issues))


__all__ = [
    "JointState", "JointAction", "Observation",
    "InteractionIndicator", "FactoredModel", "ValidationReport",
    "build_model", "compose_transition", "compose_transition_row",
    "compose_reward", "validate_model", "replace",
]
