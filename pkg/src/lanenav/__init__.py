"""Dynamic lane-crossing navigation with forward models and MCTS planning."""

from .harness import BenchCell, BenchTable, EpisodeRecord, run_benchmark, run_episode, summarize
from .mcts import MCTSConfig, plan_action
from .models import (
    ErrorMap,
    History,
    PredictedFrame,
    PredictedRollout,
    build_model,
    frozen_predict,
    noisy_sample_predict,
    oracle_predict,
    prediction_error,
    velocity_predict,
)
from .world import (
    Outcome,
    WorldConfig,
    WorldState,
    action_to_velocity,
    agent_step,
    clone_state,
    new_episode,
    render_frame,
    world_step,
)

__all__ = [
    "BenchCell",
    "BenchTable",
    "EpisodeRecord",
    "ErrorMap",
    "History",
    "MCTSConfig",
    "Outcome",
    "PredictedFrame",
    "PredictedRollout",
    "WorldConfig",
    "WorldState",
    "action_to_velocity",
    "agent_step",
    "build_model",
    "clone_state",
    "frozen_predict",
    "new_episode",
    "noisy_sample_predict",
    "oracle_predict",
    "plan_action",
    "prediction_error",
    "render_frame",
    "run_benchmark",
    "run_episode",
    "summarize",
    "velocity_predict",
    "world_step",
]

__version__ = "0.1.0"
