"""Belief-weighted action selection on top of the joint value function.

The acting agent solves its fully observable joint model once per task
(with the predicted opponent strategy baked into the backup) and then, at
every step, scores each own action by the expectation of the joint action
values under the current belief and the opponent strategy. No further
value computation happens per step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .belief import Belief
from .model import FactoredModel, InteractionIndicator, build_model
from .solver import MixedStrategy, QFunction, value_iteration
from .tasks import TaskParameter


@dataclass(frozen=True, eq=False)
class ActionValues:
    """Score per own action, [A]."""

    q: np.ndarray


def plan(task: TaskParameter, pi_hat_j: MixedStrategy, K: int,
         model: FactoredModel | None = None,
         X: InteractionIndicator | None = None) -> QFunction:
    """Joint action values for agent i against the predicted strategy."""
    if model is None:
        model = build_model(task)
    if X is None:
        X = model.indicator
    q, _ = value_iteration(model, X, "i", pi_hat_j, K, task.gamma)
    return q


def action_values(q_table: QFunction, belief: Belief,
                  pi_hat_j: MixedStrategy) -> ActionValues:
    """Belief- and opponent-weighted value of each own action; no renormalization."""
    n_joint = q_table.values.shape[0]
    if belief.probs.shape != (n_joint,) or pi_hat_j.probs.shape[0] != n_joint:
        raise ValueError("belief/strategy shapes do not match the value table")
    q = np.einsum("s,sab,sb->a", belief.probs, q_table.values, pi_hat_j.probs)
    q.flags.writeable = False
    return ActionValues(q=q)


def select_action(av: ActionValues, mode: str = "argmax", temperature: float = 1.0,
                  rng: int | np.random.Generator | None = None) -> int:
    """Pick an action: deterministic argmax (ties to the lowest id) or a
    seeded softmax sample."""
    if mode == "argmax":
        return int(np.argmax(av.q))
    if mode == "softmax":
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        if rng is None:
            raise ValueError("softmax selection needs an rng or seed")
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        z = (av.q - av.q.max()) / temperature
        p = np.exp(z)
        p /= p.sum()
        return int(rng.choice(p.shape[0], p=p))
    raise ValueError(f"mode must be 'argmax' or 'softmax', got {mode!r}")


__all__ = ["ActionValues", "plan", "action_values", "select_action"]
