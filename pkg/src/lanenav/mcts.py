"""PUCT Monte-Carlo tree search over the 8-action space.

The search consumes one shared ``PredictedRollout`` and never calls a model:
the tree is bounded to the rollout length, node expansion moves a simulated
agent with the environment's own kinematics, and collision / goal checks at
depth d read predicted frame d-1 (the frame for world time t+d). Node
selection is PUCT with a goal-directed von-Mises-style prior; the final
action is sampled from visit counts sharpened by a temperature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import PredictedRollout
from .world import N_ACTIONS, action_to_velocity, round_px

_ANGLES = tuple(a * math.pi / 4.0 for a in range(N_ACTIONS))
_UNIFORM = (1.0 / N_ACTIONS,) * N_ACTIONS


@dataclass(frozen=True)
class MCTSConfig:
    n_rollouts: int = 100
    rollout_length: int = 3
    temperature: float = 0.01
    c_puct: float = 1.4
    prior_kappa: float = 2.0
    death_value: float = -20.0
    goal_value: float = 20.0
    shaping_beta: float = 0.0

    def validate(self) -> None:
        if self.n_rollouts < 1:
            raise ValueError("n_rollouts must be >= 1")
        if self.rollout_length < 1:
            raise ValueError("rollout_length must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.prior_kappa < 0:
            raise ValueError("prior_kappa must be >= 0")


class SearchNode:
    __slots__ = ("depth", "x", "y", "prior", "n", "w", "children", "terminal_value")

    def __init__(self, depth: int, x: float, y: float) -> None:
        self.depth = depth
        self.x = x
        self.y = y
        self.prior = _UNIFORM
        self.n = [0] * N_ACTIONS
        self.w = [0.0] * N_ACTIONS
        self.children: list[SearchNode | None] = [None] * N_ACTIONS
        self.terminal_value: float | None = None

    def q(self, action: int) -> float:
        visits = self.n[action]
        return self.w[action] / visits if visits else 0.0


def goal_prior(
    agent_pos: tuple[float, float],
    goal_estimate: tuple[float, float] | None,
    kappa: float,
) -> list[float]:
    """Action prior concentrated toward the predicted goal direction.

    P(a) is proportional to exp(kappa * cos(angle_a - angle_goal)); uniform
    when there is no goal estimate, the goal sits on the agent, or kappa = 0.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if goal_estimate is None:
        return list(_UNIFORM)
    dx = goal_estimate[0] - agent_pos[0]
    dy = goal_estimate[1] - agent_pos[1]
    if dx == 0.0 and dy == 0.0:
        return list(_UNIFORM)
    theta = math.atan2(dy, dx)
    weights = [math.exp(kappa * math.cos(a - theta)) for a in _ANGLES]
    total = sum(weights)
    return [w / total for w in weights]


def puct_select(node: SearchNode, c_puct: float) -> int:
    """Argmax of Q + c * P * sqrt(total N) / (1 + N); ties to the lowest index.

    With no visits anywhere the exploration scale is taken as 1 so the pick
    reduces to the prior argmax.
    """
    total = sum(node.n)
    scale = math.sqrt(total) if total > 0 else 1.0
    best_action = 0
    best_value = -math.inf
    for a in range(N_ACTIONS):
        visits = node.n[a]
        q = node.w[a] / visits if visits else 0.0
        value = q + c_puct * node.prior[a] * scale / (1 + visits)
        if value > best_value:
            best_value = value
            best_action = a
    return best_action


def backup(path: list[tuple[SearchNode, int]], value: float) -> None:
    """Add one visit and the rollout value to every edge on the path."""
    for node, action in path:
        node.n[action] += 1
        node.w[action] += value


def _goal_block(
    estimate: tuple[float, float] | None, goal_size: int
) -> tuple[int, int, int, int] | None:
    if estimate is None:
        return None
    half = (goal_size - 1) / 2.0
    x0 = round_px(estimate[0] - half)
    y0 = round_px(estimate[1] - half)
    return x0, x0 + goal_size - 1, y0, y0 + goal_size - 1


def run_search(
    agent_pos: tuple[float, float],
    rollout: PredictedRollout,
    cfg: MCTSConfig,
    agent_speed: float,
    goal_size: int = 2,
) -> SearchNode:
    """Build and fill the search tree; returns the root with its statistics."""
    cfg.validate()
    k = cfg.rollout_length
    if len(rollout.steps) < k:
        raise ValueError(f"rollout provides {len(rollout.steps)} steps, need {k}")
    height, width = rollout.steps[0].occupancy.shape
    max_x, max_y = float(width - 1), float(height - 1)
    diag = math.hypot(max_x, max_y)
    moves = [action_to_velocity(a, agent_speed) for a in range(N_ACTIONS)]
    occs = [rollout.steps[d].occupancy for d in range(k)]
    goals = [rollout.steps[d].goal_estimate for d in range(k)]
    blocks = [_goal_block(goals[d], goal_size) for d in range(k)]

    def leaf_value(node: SearchNode) -> float:
        if cfg.shaping_beta == 0.0:
            return 0.0
        goal = goals[node.depth - 1] if node.depth >= 1 else goals[0]
        if goal is None:
            return 0.0
        dist = math.hypot(node.x - goal[0], node.y - goal[1])
        return -cfg.shaping_beta * dist / diag

    root = SearchNode(0, agent_pos[0], agent_pos[1])
    root.prior = goal_prior((root.x, root.y), goals[0], cfg.prior_kappa)

    for _ in range(cfg.n_rollouts):
        node = root
        path: list[tuple[SearchNode, int]] = []
        while True:
            action = puct_select(node, cfg.c_puct)
            path.append((node, action))
            child = node.children[action]
            if child is None:
                dx, dy = moves[action]
                nx = min(max(node.x + dx, 0.0), max_x)
                ny = min(max(node.y + dy, 0.0), max_y)
                child = SearchNode(node.depth + 1, nx, ny)
                px, py = round_px(nx), round_px(ny)
                block = blocks[node.depth]
                if block is not None and block[0] <= px <= block[1] and block[2] <= py <= block[3]:
                    child.terminal_value = cfg.goal_value
                elif occs[node.depth][py, px]:
                    child.terminal_value = cfg.death_value
                elif child.depth < k:
                    child.prior = goal_prior((nx, ny), goals[child.depth], cfg.prior_kappa)
                node.children[action] = child
                value = child.terminal_value if child.terminal_value is not None else leaf_value(child)
                break
            if child.terminal_value is not None:
                value = child.terminal_value
                break
            if child.depth >= k:
                value = leaf_value(child)
                break
            node = child
        backup(path, value)
    return root


def select_by_temperature(visits: list[int], temperature: float, rng: np.random.Generator) -> int:
    """Sample an action from pi(a) proportional to N(a)^(1/temperature)."""
    logs = [math.log(v) if v > 0 else -math.inf for v in visits]
    top = max(logs)
    weights = [math.exp((l - top) / temperature) if l > -math.inf else 0.0 for l in logs]
    total = sum(weights)
    probs = np.array([w / total for w in weights])
    return int(rng.choice(len(visits), p=probs))


def plan_action(
    agent_pos: tuple[float, float],
    rollout: PredictedRollout,
    cfg: MCTSConfig,
    rng: np.random.Generator,
    agent_speed: float,
    goal_size: int = 2,
) -> int:
    """One planned action: search the shared rollout, then pick by visits."""
    root = run_search(agent_pos, rollout, cfg, agent_speed, goal_size=goal_size)
    return select_by_temperature(root.n, cfg.temperature, rng)
