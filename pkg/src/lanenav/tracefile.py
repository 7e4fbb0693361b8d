"""Episode traces: JSON-lines with run-length-encoded frames.

First line is a header record carrying everything needed to replay the
episode (configs, model spec, episode seed); each following line is one step:

    {"t", "agent_pos", "action", "reward", "outcome", "frame_rle"}

``frame_rle`` encodes the post-step palette frame row-major as
"value:count,value:count,...".
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import (
    mcts_config_from_dict,
    mcts_config_to_dict,
    world_config_from_dict,
    world_config_to_dict,
)
from .fileio import atomic_write_text
from .harness import EpisodeRecord
from .mcts import MCTSConfig
from .world import WorldConfig


def frame_to_rle(frame: np.ndarray) -> str:
    flat = frame.ravel()
    # Run boundaries wherever the value changes.
    change = np.nonzero(np.diff(flat))[0] + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [flat.size]))
    return ",".join(f"{int(flat[s])}:{int(e - s)}" for s, e in zip(starts, ends))


def rle_to_frame(rle: str, grid_h: int, grid_w: int) -> np.ndarray:
    values = []
    counts = []
    for token in rle.split(","):
        value, _, count = token.partition(":")
        values.append(int(value))
        counts.append(int(count))
    flat = np.repeat(np.array(values, dtype=np.uint8), counts)
    if flat.size != grid_h * grid_w:
        raise ValueError(f"RLE decodes to {flat.size} cells, expected {grid_h * grid_w}")
    return flat.reshape(grid_h, grid_w)


@dataclass
class Trace:
    world_config: WorldConfig
    mcts_config: MCTSConfig
    model_spec: str
    episode_seed: int
    outcome: str
    steps: list[dict]

    def frame_at(self, index: int) -> np.ndarray:
        cfg = self.world_config
        return rle_to_frame(self.steps[index]["frame_rle"], cfg.grid_h, cfg.grid_w)

    @property
    def actions(self) -> list[int]:
        return [int(s["action"]) for s in self.steps]


def write_trace(path: str | Path, record: EpisodeRecord) -> None:
    if record.frames is None:
        raise ValueError("record has no frames; run the episode with keep_frames=True")
    header = {
        "kind": "header",
        "episode_seed": record.episode_seed,
        "model": record.model_spec,
        "outcome": record.outcome.kind,
        "world": world_config_to_dict(record.world_config),
        "mcts": mcts_config_to_dict(record.mcts_config),
    }
    lines = [json.dumps(header, sort_keys=True)]
    # frames[0] is the initial frame; frames[i+1] matches trace step i.
    for i, step in enumerate(record.trace):
        lines.append(json.dumps({
            "t": step.t,
            "agent_pos": [step.agent_x, step.agent_y],
            "action": step.action,
            "reward": step.reward,
            "outcome": step.outcome,
            "frame_rle": frame_to_rle(record.frames[i + 1]),
        }, sort_keys=True))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_trace(path: str | Path) -> Trace:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty trace")
    header = json.loads(lines[0])
    if header.get("kind") != "header":
        raise ValueError(f"{path}: first line is not a trace header")
    return Trace(
        world_config=world_config_from_dict(header["world"]),
        mcts_config=mcts_config_from_dict(header["mcts"]),
        model_spec=header["model"],
        episode_seed=int(header["episode_seed"]),
        outcome=header["outcome"],
        steps=[json.loads(line) for line in lines[1:]],
    )
