"""Recursive Bayesian filtering of the belief over joint states.

Propagation runs the belief through the same indicator-gated split as the
value backup: mass at non-interactive states flows through the two
single-agent factors (opponent first), mass at interactive states flows
through the interactive joint table. The correction multiplies by the
observation likelihood of the agent's own post-transition cell and
normalizes once.

Two weighting modes for the other agent's action: a delta on a supplied
action (used when replaying recorded joint actions) or an expectation
under a predicted strategy (used when planning autonomously).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import FactoredModel, InteractionIndicator
from .solver import MixedStrategy
from .tasks import NUM_ACTIONS, TaskParameter, grid_geometry


class ZeroLikelihoodError(ValueError):
    """The observation has zero probability under the predicted belief."""


@dataclass(frozen=True, eq=False)
class Belief:
    """Distribution over joint states, [nJ]."""

    probs: np.ndarray

    @property
    def n_joint(self) -> int:
        return self.probs.shape[0]


def _frozen_belief(p: np.ndarray) -> Belief:
    p.flags.writeable = False
    return Belief(probs=p)


def initial_belief(task: TaskParameter, model: FactoredModel | None = None) -> Belief:
    """Uniform product distribution over the two init supports."""
    geom = model.geom if model is not None else grid_geometry(task)
    bi = np.zeros(geom.n_free)
    bj = np.zeros(geom.n_free)
    for c in task.init_support_i:
        bi[geom.cell_index[c]] = 1.0 / len(task.init_support_i)
    for c in task.init_support_j:
        bj[geom.cell_index[c]] = 1.0 / len(task.init_support_j)
    return _frozen_belief(np.outer(bi, bj).ravel())


def _propagate_joint_action(bel_grid: np.ndarray, model: FactoredModel,
                            xf: np.ndarray, a_i: int, a_j: int) -> np.ndarray:
    """Predicted mass for one joint action; bel_grid is [nF, nF]."""
    nf = model.n_free
    bn = bel_grid * (1.0 - xf)
    # opponent factor first, then the agent's own factor
    mass = model.t_i[:, a_i, :].T @ (bn @ model.t_j[:, a_j, :])
    w_int = (bel_grid * xf).ravel()
    if w_int.any():
        mass = mass.ravel() + kernels.scatter_interactive(
            w_int, model.int_prob[:, a_i, a_j, :], model.int_succ[:, a_i, a_j, :])
        return mass.reshape(nf, nf)
    return mass


def propagate(belief: Belief, model: FactoredModel, X: InteractionIndicator,
              a_i: int, a_j: int | None = None,
              opponent_strategy: MixedStrategy | None = None) -> np.ndarray:
    """Pre-correction predicted mass over joint states, [nJ].

    Pass ``a_j`` to condition on a known joint action, or
    ``opponent_strategy`` to average over the other agent's actions.
    """
    if belief.probs.shape != (model.n_joint,):
        raise ValueError(f"belief shape {belief.probs.shape} does not match model")
    if (a_j is None) == (opponent_strategy is None):
        raise ValueError("pass exactly one of a_j or opponent_strategy")
    nf = model.n_free
    xf = X.mask.astype(float).reshape(nf, nf)
    if a_j is not None:
        bel = belief.probs.reshape(nf, nf)
        return _propagate_joint_action(bel, model, xf, a_i, a_j).ravel()
    mass = np.zeros((nf, nf))
    for aj in range(NUM_ACTIONS):
        weighted = (belief.probs * opponent_strategy.probs[:, aj]).reshape(nf, nf)
        mass += _propagate_joint_action(weighted, model, xf, a_i, aj)
    return mass.ravel()


def correct(predicted: np.ndarray, model: FactoredModel, a_i: int, o_i: int,
            on_zero: str = "raise") -> Belief:
    """Multiply by the own-cell observation likelihood and normalize.

    ``on_zero`` selects the zero-normalizer fallback: "raise" (default,
    trajectories are expected to be model-consistent) or "predicted"
    (ignore the observation and renormalize the prediction).
    """
    if on_zero not in ("raise", "predicted"):
        raise ValueError(f"on_zero must be 'raise' or 'predicted', got {on_zero!r}")
    nf = model.n_free
    lik = model.obs_i[:, a_i, o_i]
    post = predicted.reshape(nf, nf) * lik[:, None]
    norm = post.sum()
    if norm <= 0.0:
        if on_zero == "raise":
            raise ZeroLikelihoodError(
                f"observation {o_i} after action {a_i} has zero likelihood "
                "under the predicted belief")
        post = predicted.reshape(nf, nf)
        norm = post.sum()
        if norm <= 0.0:
            raise ZeroLikelihoodError("predicted belief carries no mass")
    return _frozen_belief((post / norm).ravel())


def update(belief: Belief, model: FactoredModel, X: InteractionIndicator,
           a_i: int, o_i: int, a_j: int | None = None,
           opponent_strategy: MixedStrategy | None = None,
           on_zero: str = "raise") -> Belief:
    """One full filter step: propagate then correct."""
    mass = propagate(belief, model, X, a_i, a_j=a_j, opponent_strategy=opponent_strategy)
    return correct(mass, model, a_i, o_i, on_zero=on_zero)


__all__ = [
    "Belief", "ZeroLikelihoodError", "initial_belief",
    "propagate", "correct", "update",
]
