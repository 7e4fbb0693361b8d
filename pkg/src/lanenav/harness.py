"""Episode runner and benchmark grid.

One episode = loop of (predict rollout, plan action, step environment).
Observation-only models receive the 4-frame ``History``; state models receive
the hidden ``WorldState``. The benchmark evaluates every grid cell on the
same derived episode seeds, so all cells see identical environment
realizations, and reduces to a G/T/D/S table.
"""
from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .mcts import MCTSConfig, plan_action
from .models import ForwardModel, History, build_model
from .seeding import STREAM_AGENT, STREAM_MODEL, STREAM_PLAN, episode_seed, make_rng, substream
from .world import (
    DIED,
    GOAL_REACHED,
    N_ACTIONS,
    RUNNING,
    TIMED_OUT,
    Outcome,
    WorldConfig,
    agent_step,
    new_episode,
    render_frame,
)


@dataclass(frozen=True)
class StepRecord:
    t: int
    agent_x: float
    agent_y: float
    action: int
    reward: float
    outcome: str


@dataclass
class EpisodeRecord:
    episode_seed: int
    outcome: Outcome
    steps: int
    trace: list[StepRecord]
    model_name: str
    model_spec: str
    world_config: WorldConfig
    mcts_config: MCTSConfig
    error: str | None = None
    frames: list[np.ndarray] | None = None


@dataclass(frozen=True)
class BenchCell:
    model_spec: str
    speed: str  # "1x" or "2x"
    rollout_length: int


@dataclass(frozen=True)
class BenchRow:
    model: str
    n_samples: int
    speed: str
    k: int
    g: int
    t: int
    d: int
    s_mean: float | None
    s_std: float | None
    episodes: int


@dataclass
class BenchTable:
    rows: list[BenchRow] = field(default_factory=list)

    CSV_HEADER = "model,n_samples,speed,k,G,T,D,S_mean,S_std,episodes"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            s_mean = "" if r.s_mean is None else f"{r.s_mean:.6f}"
            s_std = "" if r.s_std is None else f"{r.s_std:.6f}"
            lines.append(
                f"{r.model},{r.n_samples},{r.speed},{r.k},{r.g},{r.t},{r.d},{s_mean},{s_std},{r.episodes}"
            )
        return "\n".join(lines) + "\n"

    def format_text(self) -> str:
        header = f"{'model':<10} {'n':>3} {'speed':>5} {'k':>3} {'G':>4} {'T':>4} {'D':>4}  {'S':<16}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            s = "-" if r.s_mean is None else f"{r.s_mean:.1f} +- {r.s_std:.1f}"
            lines.append(
                f"{r.model:<10} {r.n_samples:>3} {r.speed:>5} {r.k:>3} {r.g:>4} {r.t:>4} {r.d:>4}  {s:<16}"
            )
        return "\n".join(lines)


def run_episode(
    world_cfg: WorldConfig,
    mcts_cfg: MCTSConfig,
    model_spec: str | ForwardModel,
    ep_seed: int,
    keep_frames: bool = False,
) -> EpisodeRecord:
    """Play one full episode; deterministic given (configs, spec, seed).

    ``model_spec`` is a selection string, or a ready ForwardModel instance
    (useful for instrumented models; the caller then owns its RNG).
    """
    state = new_episode(world_cfg, ep_seed)
    if isinstance(model_spec, ForwardModel):
        model = model_spec
        model_spec = model.name
    else:
        model = build_model(model_spec, rng=substream(ep_seed, STREAM_MODEL))
    plan_rng = substream(ep_seed, STREAM_PLAN)
    agent_rng = substream(ep_seed, STREAM_AGENT)

    first = render_frame(state)
    history: deque[np.ndarray] = deque([first] * 4, maxlen=4)
    frames = [first] if keep_frames else None
    trace: list[StepRecord] = []
    outcome = Outcome(RUNNING, 0.0, 0)
    error = None

    while True:
        try:
            if model is None:
                action = int(agent_rng.integers(N_ACTIONS))
            else:
                if model.needs_state:
                    rollout = model.predict(state, mcts_cfg.rollout_length)
                else:
                    rollout = model.predict(History(tuple(history), state.t), mcts_cfg.rollout_length)
                action = plan_action(
                    (state.agent.x, state.agent.y),
                    rollout,
                    mcts_cfg,
                    plan_rng,
                    agent_speed=world_cfg.agent_speed,
                    goal_size=world_cfg.goal_size,
                )
        except Exception as exc:  # diagnostic record instead of a crash
            error = f"{type(exc).__name__}: {exc}"
            break
        outcome = agent_step(state, action)
        trace.append(StepRecord(outcome.steps_taken, state.agent.x, state.agent.y,
                                action, outcome.reward, outcome.kind))
        frame = render_frame(state)
        history.append(frame)
        if keep_frames:
            frames.append(frame)
        if outcome.is_terminal:
            break

    return EpisodeRecord(
        episode_seed=ep_seed,
        outcome=outcome,
        steps=outcome.steps_taken,
        trace=trace,
        model_name=model.name if model is not None else "random",
        model_spec=model_spec,
        world_config=world_cfg,
        mcts_config=mcts_cfg,
        error=error,
        frames=frames,
    )


def verify_replay(record: EpisodeRecord) -> bool:
    """Re-run the logged actions through a fresh world; True iff it matches."""
    state = new_episode(record.world_config, record.episode_seed)
    for step in record.trace:
        outcome = agent_step(state, step.action)
        if outcome.reward != step.reward or outcome.kind != step.outcome:
            return False
        if outcome.steps_taken != step.t:
            return False
    return record.trace == [] or record.trace[-1].outcome == record.outcome.kind


def speed_label(world_cfg: WorldConfig) -> str:
    if world_cfg.agent_speed == 1.0:
        return "2x"
    if world_cfg.agent_speed == 0.5:
        return "1x"
    return f"{world_cfg.agent_speed:g}px"


def _aggregate(outcomes: list[tuple[str, int]]) -> tuple[int, int, int, float | None, float | None]:
    """G/T/D counts plus mean and population std of steps over non-deaths."""
    g = sum(1 for kind, _ in outcomes if kind == GOAL_REACHED)
    d = sum(1 for kind, _ in outcomes if kind == DIED)
    t = sum(1 for kind, _ in outcomes if kind == TIMED_OUT)
    survivor_steps = [steps for kind, steps in outcomes if kind != DIED]
    if not survivor_steps:
        return g, t, d, None, None
    mean = sum(survivor_steps) / len(survivor_steps)
    var = sum((s - mean) ** 2 for s in survivor_steps) / len(survivor_steps)
    return g, t, d, mean, math.sqrt(var)


def summarize(records: list[EpisodeRecord]) -> BenchRow:
    """One table row for a batch of episodes of the same condition."""
    if not records:
        raise ValueError("summarize needs at least one record")
    g, t, d, mean, std = _aggregate([(r.outcome.kind, r.steps) for r in records])
    first = records[0]
    name, n_samples = model_label(first.model_spec)
    return BenchRow(model=name, n_samples=n_samples, speed=speed_label(first.world_config),
                    k=first.mcts_config.rollout_length, g=g, t=t, d=d,
                    s_mean=mean, s_std=std, episodes=len(records))


def model_label(model_spec: str) -> tuple[str, int]:
    model = build_model(model_spec, rng=make_rng(0))
    if model is None:
        return "random", 1
    return model.name, model.n_samples


def _episode_result(cell: BenchCell, world_cfg: WorldConfig, mcts_cfg: MCTSConfig,
                    ep_seed: int) -> tuple[str, int]:
    record = run_episode(world_cfg, mcts_cfg, cell.model_spec, ep_seed)
    if record.error is not None:
        raise RuntimeError(f"episode {ep_seed} failed: {record.error}")
    return record.outcome.kind, record.steps


def _bench_task(args: tuple[int, int, BenchCell, WorldConfig, MCTSConfig, int]) -> tuple[int, int, str, int]:
    cell_idx, ep_idx, cell, world_cfg, mcts_cfg, ep_seed = args
    kind, steps = _episode_result(cell, world_cfg, mcts_cfg, ep_seed)
    return cell_idx, ep_idx, kind, steps


def run_benchmark(
    cells: list[BenchCell],
    world_cfg: WorldConfig,
    mcts_cfg: MCTSConfig,
    n_episodes: int,
    master_seed: int | None = None,
    parallelism: int = 1,
) -> BenchTable:
    """Evaluate every cell on the same n_episodes derived seeds."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if master_seed is None:
        master_seed = world_cfg.master_seed
    seeds = [episode_seed(master_seed, i) for i in range(n_episodes)]

    tasks = []
    for ci, cell in enumerate(cells):
        cell_world = world_cfg.for_speed(cell.speed)
        cell_mcts = replace(mcts_cfg, rollout_length=cell.rollout_length)
        for ei, seed in enumerate(seeds):
            tasks.append((ci, ei, cell, cell_world, cell_mcts, seed))

    results: dict[tuple[int, int], tuple[str, int]] = {}
    if parallelism <= 1:
        for task in tasks:
            ci, ei, kind, steps = _bench_task(task)
            results[(ci, ei)] = (kind, steps)
    else:
        chunk = max(1, len(tasks) // (parallelism * 8))
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for ci, ei, kind, steps in pool.map(_bench_task, tasks, chunksize=chunk):
                results[(ci, ei)] = (kind, steps)

    table = BenchTable()
    for ci, cell in enumerate(cells):
        g, t, d, mean, std = _aggregate([results[(ci, ei)] for ei in range(n_episodes)])
        name, n_samples = model_label(cell.model_spec)
        table.rows.append(BenchRow(model=name, n_samples=n_samples, speed=cell.speed,
                                   k=cell.rollout_length, g=g, t=t, d=d,
                                   s_mean=mean, s_std=std, episodes=n_episodes))
    return table
