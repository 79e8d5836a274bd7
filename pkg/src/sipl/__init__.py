"""Decentralized two-agent planning under partial observability with sparse
interactions: factored model, nested opponent reasoning, belief filtering,
belief-weighted planning, a Tiger-grid simulator, and an expert-trajectory
dataset pipeline."""

from .tasks import (
    NORTH, EAST, SOUTH, WEST, LISTEN, OPEN, NUM_ACTIONS, NUM_OBS,
    ACTION_NAMES, TaskError, RewardParams, TaskParameter, GridGeometry,
    grid_geometry, load_task, save_task, task_from_json_dict,
    observation_code, observation_bits,
)
from .model import (
    InteractionIndicator, FactoredModel, ValidationReport,
    build_model, compose_transition, compose_transition_row,
    compose_reward, validate_model,
)
from .solver import (
    MixedStrategy, QFunction, UtilityTable, NestedSpec,
    uniform_strategy, level0_strategy, value_iteration, vi_sweep,
    softmax_policy, solve_nested,
)
from .belief import Belief, ZeroLikelihoodError, initial_belief, propagate, correct, update
from .planner import ActionValues, plan, action_values, select_action
from .env import (
    GenerationExhausted, StepAfterDone, GridSpec, EpisodeState,
    TigerGridSim, generate, derive_rng,
)
from .dataset import (
    ExpertPolicy, ExpertSolution, RandomPolicy, TrajectoryRecord,
    DatasetManifest, Metrics, solve_expert, simulate_episode,
    build_dataset, load_dataset, evaluate_policy, metrics_from_records,
)
from .kernels import backend

__version__ = "0.1.0"
