"""Value iteration over the factored joint model and nested opponent reasoning.

The other agent is modelled by a hierarchy of fully observable planning
levels: level 0 acts uniformly at random, and level l best-responds (via a
softmax over marginalized action values) to the level l-1 mixture of its
opponent. The returned strategy for the top level is the probability-
weighted mixture over all levels.

Each value-iteration sweep applies the sparse-interaction backup: the
expected next-step utility flows through the two single-agent factors
(opponent factor first) wherever the interaction indicator is off, and
through the interactive joint table where it is on. The per-sweep utility
is the maximum over the planning agent's own action of the opponent-
strategy-weighted action values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import FactoredModel, InteractionIndicator, build_model
from .tasks import NUM_ACTIONS, TaskParameter, grid_geometry


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    """Per-state distribution over one agent's actions, [nJ, A]."""

    probs: np.ndarray
    agent: str  # "i" or "j"


@dataclass(frozen=True, eq=False)
class QFunction:
    """Joint action values, [nJ, A, A] with axes (state, a_i, a_j)."""

    values: np.ndarray
    horizon: int
    agent: str


@dataclass(frozen=True, eq=False)
class UtilityTable:
    """State utilities, [nJ]."""

    values: np.ndarray
    horizon: int


@dataclass(frozen=True)
class NestedSpec:
    """Configuration of the nested opponent model.

    ``level_dist[l]`` is the probability that the other agent reasons at
    level l; it must have ``top_level + 1`` entries summing to one.
    """

    top_level: int = 1
    level_dist: tuple[float, ...] = (0.5, 0.5)
    horizon: int = 12
    softmax_temperature: float = 1.0

    def validate(self) -> None:
        if self.top_level < 0:
            raise ValueError("top_level must be nonnegative")
        if len(self.level_dist) != self.top_level + 1:
            raise ValueError("level_dist must have top_level + 1 entries")
        if any(p < 0 for p in self.level_dist) or abs(sum(self.level_dist) - 1.0) > 1e-9:
            raise ValueError("level_dist must be a probability distribution")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.softmax_temperature <= 0:
            raise ValueError("softmax_temperature must be positive")

    @classmethod
    def for_task(cls, task: TaskParameter, top_level: int = 1,
                 softmax_temperature: float = 1.0) -> "NestedSpec":
        dist = tuple([1.0 / (top_level + 1)] * (top_level + 1))
        return cls(top_level=top_level, level_dist=dist,
                   horizon=2 * task.grid_size, softmax_temperature=softmax_temperature)


def _other(agent: str) -> str:
    return "j" if agent == "i" else "i"


def uniform_strategy(n_joint: int, agent: str) -> MixedStrategy:
    p = np.full((n_joint, NUM_ACTIONS), 1.0 / NUM_ACTIONS)
    p.flags.writeable = False
    return MixedStrategy(probs=p, agent=agent)


def level0_strategy(task: TaskParameter, agent: str = "j") -> MixedStrategy:
    """Uniform strategy over the other agent's actions in every state."""
    geom = grid_geometry(task)
    return uniform_strategy(geom.n_joint, agent)


def composed_reward_table(model: FactoredModel, X: InteractionIndicator,
                          self_agent: str) -> np.ndarray:
    """Indicator-gated reward for the planning agent, [nJ, A, A]."""
    xf = X.mask.astype(float)
    if self_agent == "i":
        single = model.r_i[model.si_of()][:, :, None]
        inter = model.r_int_i
    else:
        single = model.r_j[model.sj_of()][:, None, :]
        inter = model.r_int_j
    return (1.0 - xf)[:, None, None] * single + xf[:, None, None] * inter


def marginal_q(q_values: np.ndarray, opponent_probs: np.ndarray,
               self_agent: str) -> np.ndarray:
    """Opponent-strategy-weighted action values, [nJ, A] over the own action."""
    if self_agent == "i":
        return np.einsum("sab,sb->sa", q_values, opponent_probs)
    return np.einsum("sab,sa->sb", q_values, opponent_probs)


def vi_sweep(model: FactoredModel, X: InteractionIndicator, self_agent: str,
             opponent_strategy: MixedStrategy, gamma: float,
             u_flat: np.ndarray, r_comp: np.ndarray | None = None
             ) -> tuple[np.ndarray, np.ndarray]:
    """One backup: returns (q [nJ, A, A], next utility [nJ])."""
    if r_comp is None:
        r_comp = composed_reward_table(model, X, self_agent)
    nf = model.n_free
    xf = X.mask.astype(float)
    eu_ni = kernels.two_step_backup(model.t_i, model.t_j,
                                    u_flat.reshape(nf, nf))
    eu_ni = eu_ni.reshape(model.n_joint, NUM_ACTIONS, NUM_ACTIONS)
    eu_int = kernels.gather_expected(model.int_prob, model.int_succ, u_flat)
    q = r_comp + gamma * ((1.0 - xf)[:, None, None] * eu_ni
                          + xf[:, None, None] * eu_int)
    u_next = marginal_q(q, opponent_strategy.probs, self_agent).max(axis=1)
    return q, u_next


def value_iteration(model: FactoredModel, X: InteractionIndicator, self_agent: str,
                    opponent_strategy: MixedStrategy, K: int, gamma: float
                    ) -> tuple[QFunction, UtilityTable]:
    """K sweeps of the factored backup starting from the zero utility."""
    if self_agent not in ("i", "j"):
        raise ValueError(f"self_agent must be 'i' or 'j', got {self_agent!r}")
    if not isinstance(K, int) or K < 1:
        raise ValueError(f"K must be a positive integer, got {K!r}")
    if opponent_strategy.agent == self_agent:
        raise ValueError("opponent_strategy is tagged with the planning agent itself")
    if opponent_strategy.probs.shape != (model.n_joint, NUM_ACTIONS):
        raise ValueError(
            f"strategy shape {opponent_strategy.probs.shape} does not match "
            f"model with {model.n_joint} joint states")
    r_comp = composed_reward_table(model, X, self_agent)
    u = np.zeros(model.n_joint)
    q = None
    for _ in range(K):
        q, u = vi_sweep(model, X, self_agent, opponent_strategy, gamma, u, r_comp)
    q.flags.writeable = False
    u.flags.writeable = False
    return (QFunction(values=q, horizon=K, agent=self_agent),
            UtilityTable(values=u, horizon=K))


def softmax_policy(q: QFunction, opponent_strategy: MixedStrategy,
                   temperature: float) -> MixedStrategy:
    """Marginalize over the opponent, then per-state softmax at ``temperature``."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    m = marginal_q(q.values, opponent_strategy.probs, q.agent)
    z = (m - m.max(axis=1, keepdims=True)) / temperature
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    p.flags.writeable = False
    return MixedStrategy(probs=p, agent=q.agent)


def mix_strategies(strategies: list[MixedStrategy], weights) -> MixedStrategy:
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    p = sum(wl * s.probs for wl, s in zip(w, strategies))
    p.flags.writeable = False
    return MixedStrategy(probs=p, agent=strategies[0].agent)


def solve_nested(task: TaskParameter, spec: NestedSpec,
                 model: FactoredModel | None = None,
                 X: InteractionIndicator | None = None) -> MixedStrategy:
    """Predicted strategy of the other agent at the top reasoning level.

    Builds the alternating-perspective hierarchy bottom-up: the pure level-l
    policy of an agent softmax-responds to the opponent's level l-1 mixture,
    and mixtures weight levels 0..l by the level distribution truncated and
    renormalized to the levels that exist.
    """
    spec.validate()
    if model is None:
        model = build_model(task)
    if X is None:
        X = model.indicator

    pure = {("i", 0): uniform_strategy(model.n_joint, "i"),
            ("j", 0): uniform_strategy(model.n_joint, "j")}
    mixed = dict(pure)
    for level in range(1, spec.top_level + 1):
        for agent in ("i", "j"):
            q, _ = value_iteration(model, X, agent, mixed[(_other(agent), level - 1)],
                                   spec.horizon, task.gamma)
            pure[(agent, level)] = softmax_policy(
                q, mixed[(_other(agent), level - 1)], spec.softmax_temperature)
            levels = [pure[(agent, l)] for l in range(level + 1)]
            mixed[(agent, level)] = mix_strategies(levels, spec.level_dist[:level + 1])
    return mixed[("j", spec.top_level)]


__all__ = [
    "MixedStrategy", "QFunction", "UtilityTable", "NestedSpec",
    "uniform_strategy", "level0_strategy", "composed_reward_table",
    "marginal_q", "vi_sweep", "value_iteration", "softmax_policy",
    "mix_strategies", "solve_nested",
]
