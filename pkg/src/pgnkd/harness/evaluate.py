"""Goal-achievement evaluation: up to 50 bumper-filtered steps per episode."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..distill import Perception, student_action
from ..teacher import NnqlStore, select_action
from ..workspace import (
    GridWorkspace,
    Pose,
    distance,
    execute,
    goal_reached,
    random_free_pose,
    safe_actions,
)

EVAL_STEPS = 50

PLANNER_LABELS = {"random": "Random", "nnql": "NNQL", "mlp": "MLP"}


@dataclass(frozen=True)
class EpisodeRecord:
    start: Pose
    steps: int
    reached: bool
    final_distance: float


@dataclass
class EvalResult:
    workspace: str
    planner: str
    episodes: list[EpisodeRecord] = field(default_factory=list)

    @property
    def rate(self) -> float:
        if not self.episodes:
            raise ValueError("no episodes evaluated")
        return sum(e.reached for e in self.episodes) / len(self.episodes)


def episode_rngs(seed: int, index: int):
    """Independent start and motion streams for one episode, independent of run order."""
    return np.random.default_rng([seed, index, 0]), np.random.default_rng([seed, index, 1])


def random_planner():
    def plan(pose, safe, rng):
        choices = sorted(safe)
        return choices[rng.integers(len(choices))]
    return plan


def teacher_planner(store: NnqlStore, perception: Perception):
    def plan(pose, safe, rng):
        return select_action(store, perception.teacher_state(pose), safe, 0.0, rng)
    return plan


def student_planner(student, perception: Perception):
    def plan(pose, safe, rng):
        return student_action(student, perception, pose, safe)
    return plan


def run_episode(w: GridWorkspace, goal: Pose, planner, start: Pose, rng, max_steps: int = EVAL_STEPS) -> EpisodeRecord:
    pose = start
    steps = 0
    while steps < max_steps and not goal_reached(pose, goal):
        safe = safe_actions(w, pose)
        if not safe:
            break
        a = planner(pose, safe, rng)
        pose = execute(w, pose, a, rng).pose_after
        steps += 1
    return EpisodeRecord(start, steps, goal_reached(pose, goal), distance(pose, goal))


def evaluate(w: GridWorkspace, goal: Pose, planner, n_episodes: int, seed: int,
             planner_name: str = "", max_steps: int = EVAL_STEPS, starts=None) -> EvalResult:
    """Evaluate ``planner(pose, safe, rng) -> action`` from seeded random free starts."""
    if not (~w.occupancy).any():
        raise ValueError("workspace has no free start cell")
    result = EvalResult(w.name, planner_name)
    for i in range(n_episodes):
        start_rng, motion_rng = episode_rngs(seed, i)
        start = starts[i] if starts is not None else random_free_pose(w, start_rng)
        result.episodes.append(run_episode(w, goal, planner, start, motion_rng, max_steps))
    return result
