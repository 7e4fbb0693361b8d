"""Command-line entry point.

Subcommands:
  play      one episode; optional JSONL trace and per-step PPM dump
  bench     model x rollout-length x speed grid; text table + CSV
  render    true / predicted / error image triptych for one decision point
  validate  statistical self-checks of the simulator and planner

Every config key is also a flag (e.g. ``--level 6``); ``--config FILE`` loads
a key = value file first and flags override it. The output directory comes
from ``--out-dir``, else the LANENAV_OUT_DIR environment variable, else the
working directory.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from .config import CONFIG_KEYS, parse_config
from .fileio import atomic_write_text
from .harness import BenchCell, run_benchmark, run_episode
from .mcts import run_search
from .models import History, build_model, oracle_predict, prediction_error
from .ppm import prediction_to_rgb, render_error_map, render_ppm, write_ppm
from .seeding import STREAM_MODEL, episode_seed, make_rng, substream
from .tracefile import read_trace, write_trace
from .world import (
    ConfigError,
    agent_step,
    clone_state,
    new_episode,
    render_frame,
    world_step,
)

OUT_DIR_ENV = "LANENAV_OUT_DIR"


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key = value config file")
    group = parser.add_argument_group("config overrides")
    for key in CONFIG_KEYS:
        group.add_argument(f"--{key.replace('_', '-')}", dest=f"cfg_{key}", metavar="V")


def _configs_from_args(args: argparse.Namespace):
    overrides = {}
    for key in CONFIG_KEYS:
        value = getattr(args, f"cfg_{key}", None)
        if value is not None:
            overrides[key] = value
    return parse_config(args.config, overrides)


def _out_dir(args: argparse.Namespace) -> Path:
    if args.out_dir is not None:
        out = Path(args.out_dir)
    elif os.environ.get(OUT_DIR_ENV):
        out = Path(os.environ[OUT_DIR_ENV])
    else:
        out = Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_play(args: argparse.Namespace) -> int:
    world_cfg, mcts_cfg, model_spec = _configs_from_args(args)
    seed = args.seed if args.seed is not None else episode_seed(world_cfg.master_seed, args.episode)
    keep = args.trace is not None or args.dump_frames
    record = run_episode(world_cfg, mcts_cfg, model_spec, seed, keep_frames=keep)
    if record.error is not None:
        print(f"episode aborted: {record.error}", file=sys.stderr)
        return 1
    print(f"model={record.model_name} seed={seed} outcome={record.outcome.kind} "
          f"steps={record.steps} reward={record.outcome.reward:g}")
    out = _out_dir(args)
    if args.trace is not None:
        trace_path = Path(args.trace)
        if not trace_path.is_absolute():
            trace_path = out / trace_path
        write_trace(trace_path, record)
        print(f"trace: {trace_path}")
    if args.dump_frames:
        for i, frame in enumerate(record.frames):
            pos = None
            if i > 0:
                step = record.trace[i - 1]
                pos = (step.agent_x, step.agent_y)
            render_ppm(frame, pos, out / f"frame_{i:05d}.ppm")
        print(f"frames: {out}/frame_*.ppm ({len(record.frames)} files)")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    world_cfg, mcts_cfg, _ = _configs_from_args(args)
    cells = [
        BenchCell(model_spec=model.strip(), speed=speed.strip(), rollout_length=int(k))
        for model in args.models.split(",")
        for speed in args.speeds.split(",")
        for k in args.ks.split(",")
    ]
    table = run_benchmark(cells, world_cfg, mcts_cfg, n_episodes=args.episodes,
                          master_seed=world_cfg.master_seed, parallelism=args.parallelism)
    print(table.format_text())
    csv_path = Path(args.csv) if args.csv else _out_dir(args) / "bench.csv"
    if not csv_path.is_absolute():
        csv_path = _out_dir(args) / csv_path
    atomic_write_text(csv_path, table.to_csv())
    print(f"csv: {csv_path}")
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    trace = read_trace(args.trace)
    world_cfg = trace.world_config
    if args.step < 0 or args.step >= len(trace.steps):
        print(f"--step must be in 0..{len(trace.steps) - 1}", file=sys.stderr)
        return 2
    state = new_episode(world_cfg, trace.episode_seed)
    history = [render_frame(state)] * 4
    for action in trace.actions[:args.step]:
        agent_step(state, action)
        history = history[1:] + [render_frame(state)]

    model_spec = args.model if args.model else trace.model_spec
    model = build_model(model_spec, rng=substream(trace.episode_seed, STREAM_MODEL))
    k = args.horizon
    if model is None:
        print("random agent has no forward model to render", file=sys.stderr)
        return 2
    if model.needs_state:
        rollout = model.predict(state, k)
    else:
        rollout = model.predict(History(tuple(history), state.t), k)

    out = _out_dir(args)
    truth_clone = clone_state(state)
    for i in range(1, k + 1):
        world_step(truth_clone)
        truth = render_frame(truth_clone)
        pred = rollout.steps[i - 1]
        render_ppm(truth, (state.agent.x, state.agent.y), out / f"true_{i:02d}.ppm")
        write_ppm(prediction_to_rgb(pred.occupancy, pred.goal_estimate, world_cfg.goal_size),
                  out / f"pred_{i:02d}.ppm")
        err = prediction_error(pred, truth)
        render_error_map(err, truth, out / f"error_{i:02d}.ppm", goal_size=world_cfg.goal_size)
    print(f"wrote {3 * k} images to {out} (true_/pred_/error_ 01..{k:02d}, model={model.name})")
    return 0


def _check(name: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok


def _cmd_validate(args: argparse.Namespace) -> int:
    world_cfg, mcts_cfg, _ = _configs_from_args(args)
    steps = 20_000 if args.quick else 100_000
    tol = 0.05 if args.quick else 0.02
    ok = True

    state = new_episode(world_cfg, episode_seed(world_cfg.master_seed, 0))
    state.spawn_draws = 0
    for _ in range(steps):
        world_step(state)
    expected = len(world_cfg.lane_rows) * world_cfg.level * world_cfg.spawn_base_rate
    rate = state.spawn_draws / steps
    ok &= _check("poisson spawn rate", abs(rate - expected) <= tol * expected,
                 f"{rate:.4f} vs {expected:.4f} over {steps} steps (tol {tol:.0%})")

    state = new_episode(world_cfg, episode_seed(world_cfg.master_seed, 1))
    worst = 0.0
    for _ in range(10_000):
        world_step(state)
        speed = math.hypot(state.goal.vx, state.goal.vy)
        worst = max(worst, abs(speed - world_cfg.goal_speed))
    ok &= _check("goal speed conservation", worst <= 1e-9, f"max drift {worst:.2e} over 10000 steps")

    rng = make_rng(12345)
    searches = 200 if args.quick else 1000
    conserved = True
    for _ in range(searches):
        st = new_episode(world_cfg, int(rng.integers(2 ** 63)))
        rollout = oracle_predict(st, mcts_cfg.rollout_length)
        root = run_search((st.agent.x, st.agent.y), rollout, mcts_cfg, world_cfg.agent_speed,
                          goal_size=world_cfg.goal_size)
        conserved &= sum(root.n) == mcts_cfg.n_rollouts
    ok &= _check("mcts visit conservation", conserved, f"{searches} random searches")

    pairs = 30 if args.quick else 100
    exact = True
    for i in range(pairs):
        st = new_episode(world_cfg, episode_seed(world_cfg.master_seed, 100 + i))
        k = 1 + i % 10
        rollout = oracle_predict(st, k)
        for j in range(k):
            world_step(st)
            err = prediction_error(rollout.steps[j], render_frame(st))
            exact &= err.fn_count == 0 and err.fp_count == 0 and err.goal_err == 0.0
    ok &= _check("oracle exactness", exact, f"{pairs} state/k pairs, horizons 1..10")

    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lanenav",
                                     description="dynamic-obstacle navigation: simulator, models, planner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_play = sub.add_parser("play", help="run one episode")
    _add_config_flags(p_play)
    p_play.add_argument("--episode", type=int, default=0, help="episode index under master_seed")
    p_play.add_argument("--seed", type=int, help="explicit episode seed (overrides --episode)")
    p_play.add_argument("--trace", help="write a JSONL trace to this file")
    p_play.add_argument("--dump-frames", action="store_true", help="write one PPM per step")
    p_play.add_argument("--out-dir", help="output directory")
    p_play.set_defaults(func=_cmd_play)

    p_bench = sub.add_parser("bench", help="run a benchmark grid")
    _add_config_flags(p_bench)
    p_bench.add_argument("--models", default="oracle", help="comma-separated model specs")
    p_bench.add_argument("--ks", default="1,3", help="comma-separated rollout lengths")
    p_bench.add_argument("--speeds", default="2x", help="comma-separated agent speeds (1x,2x)")
    p_bench.add_argument("--episodes", type=int, default=100)
    p_bench.add_argument("--parallelism", type=int, default=1)
    p_bench.add_argument("--csv", help="CSV output path (default bench.csv in out dir)")
    p_bench.add_argument("--out-dir", help="output directory")
    p_bench.set_defaults(func=_cmd_bench)

    p_render = sub.add_parser("render", help="render true/predicted/error images from a trace")
    p_render.add_argument("--trace", required=True)
    p_render.add_argument("--step", type=int, default=0, help="decision step to render from")
    p_render.add_argument("--horizon", type=int, default=5)
    p_render.add_argument("--model", help="model spec (default: the trace's model)")
    p_render.add_argument("--out-dir", help="output directory")
    p_render.set_defaults(func=_cmd_render)

    p_val = sub.add_parser("validate", help="run statistical self-checks")
    _add_config_flags(p_val)
    p_val.add_argument("--quick", action="store_true", help="smaller samples, looser tolerances")
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
