"""Inference-based assistance baseline: goal scoring over a trajectory window.

Scores each candidate goal G from the window start S and current pose U as

    exp(-d(S,U)^2 - d(U,G)^2 + d(S,G)^2) * exp(-d(U,G))

with d the weighted pose distance. The first factor favors goals whose
optimal completion matches the cost of going there directly from S; the
second is a proximity prior. The window start resets after a period with
no control input.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .scene import GripperProxy, SceneModel, batch_overlaps
from .se3 import Pose, pose_distance

DEFAULT_RESET_TIMEOUT = 2.0


@dataclass(frozen=True)
class TrajectoryWindow:
    start: Pose
    start_time: float
    current: Pose
    last_input_time: float

    @classmethod
    def begin(cls, pose: Pose, now: float = 0.0) -> "TrajectoryWindow":
        return cls(start=pose, start_time=now, current=pose, last_input_time=now)


def tick_window(window: TrajectoryWindow, now: float, input_active: bool,
                current: Pose, timeout: float = DEFAULT_RESET_TIMEOUT) -> TrajectoryWindow:
    """Advance the window: track the current pose while input is active and
    restart the window once ``timeout`` seconds pass without input."""
    if now < window.last_input_time or now < window.start_time:
        raise ValueError("time went backwards")
    w = window
    if now - w.last_input_time >= timeout:
        w = dataclasses.replace(w, start=w.current, start_time=now)
    if input_active:
        w = dataclasses.replace(w, current=current, last_input_time=now)
    return w


def goal_score(start: Pose, current: Pose, goal: Pose, beta: float,
               squared_translation: bool = False) -> float:
    """Unnormalized goal likelihood; equals 1 when the current pose is the goal."""
    d_su = pose_distance(start, current, beta, squared_translation)
    d_ug = pose_distance(current, goal, beta, squared_translation)
    d_sg = pose_distance(start, goal, beta, squared_translation)
    return math.exp(-d_su * d_su - d_ug * d_ug + d_sg * d_sg) * math.exp(-d_ug)


@dataclass(frozen=True)
class GoalBelief:
    """Normalized scores over the collision-free subset of the goal set."""

    goals: tuple[Pose, ...]
    indices: np.ndarray  # into the original goal list
    scores: np.ndarray   # normalized, sums to 1 (empty when no survivor)
    best: int            # argmax into goals, -1 when empty

    def __len__(self) -> int:
        return len(self.goals)

    @property
    def best_pose(self) -> Pose | None:
        return self.goals[self.best] if self.best >= 0 else None

    @property
    def best_score(self) -> float:
        return float(self.scores[self.best]) if self.best >= 0 else 0.0


_EMPTY = GoalBelief(goals=(), indices=np.zeros(0, dtype=int),
                    scores=np.zeros(0), best=-1)


def infer_goal(window: TrajectoryWindow, goals: list[Pose], scene: SceneModel,
               proxy: GripperProxy, beta: float, exclude: str | None = None,
               workers: int = 1, margin: float = 0.0,
               squared_translation: bool = False) -> GoalBelief:
    """Score the collision-free goals for the current window.

    In-collision goals are removed before scoring so they can never be
    offered; if everything collides the belief is empty. The argmax breaks
    ties toward the lower index.
    """
    if not goals:
        raise ValueError("goal set must be non-empty")
    colliding = batch_overlaps(scene, proxy, goals, exclude=exclude,
                               margin=margin, workers=workers)
    idx = np.nonzero(~colliding)[0]
    if idx.size == 0:
        return _EMPTY
    survivors = tuple(goals[i] for i in idx)
    raw = np.array([goal_score(window.start, window.current, g, beta,
                               squared_translation) for g in survivors])
    total = float(raw.sum())
    scores = raw / total
    return GoalBelief(goals=survivors, indices=idx, scores=scores,
                      best=int(np.argmax(scores)))
