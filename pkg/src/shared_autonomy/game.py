"""Two-player co-transportation Markov game.

A point mass (the carried object) moves along one or two task axes. Robot and
human push on it simultaneously; the object only moves once the combined push
overcomes static friction. Dynamics are deterministic, the only randomness is
the initial position and whatever the policies sample.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, HorizonExceededError, InvalidActionError


def _vec(values) -> tuple:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class EnvParams:
    dt: float = 0.4
    goal: tuple = (1.0,)
    friction: float = 0.825
    effort_weight: float = 0.5
    gamma: float = 0.9
    horizon: int = 20
    dims: int = 1
    state_bounds: tuple = ((0.0, 1.0),)

    def __post_init__(self):
        object.__setattr__(self, "goal", _vec(self.goal))
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.state_bounds)
        object.__setattr__(self, "state_bounds", bounds)
        self.validate()

    def validate(self):
        if not self.dt > 0:
            raise ConfigError("must be > 0", "env.dt")
        if not 0 < self.gamma <= 1:
            raise ConfigError("must lie in (0, 1]", "env.gamma")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError("must be a positive integer", "env.horizon")
        if not self.friction >= 0:
            raise ConfigError("must be >= 0", "env.friction")
        if not self.effort_weight >= 0:
            raise ConfigError("must be >= 0", "env.effort_weight")
        if self.dims not in (1, 2):
            raise ConfigError("must be 1 or 2", "env.dims")
        if len(self.goal) != self.dims:
            raise ConfigError(f"expected {self.dims} components", "env.goal")
        if len(self.state_bounds) != self.dims:
            raise ConfigError(f"expected {self.dims} intervals", "env.state_bounds")
        for (lo, hi), g in zip(self.state_bounds, self.goal):
            if lo > hi:
                raise ConfigError("lower bound above upper bound", "env.state_bounds")
            if not lo <= g <= hi:
                raise ConfigError("goal outside state_bounds", "env.goal")

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.state_bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.state_bounds])


@dataclass(frozen=True)
class State:
    position: tuple
    t: int = 0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position))


@dataclass(frozen=True)
class JointAction:
    robot: tuple
    human: tuple

    def __post_init__(self):
        object.__setattr__(self, "robot", _vec(self.robot))
        object.__setattr__(self, "human", _vec(self.human))
        if not (np.all(np.isfinite(self.robot)) and np.all(np.isfinite(self.human))):
            raise InvalidActionError(f"non-finite joint action {self}")


@dataclass(frozen=True)
class Wrench:
    """Force (N) and torque (N*m) the human applies to the shared object."""

    force: tuple = (0.0, 0.0, 0.0)
    torque: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        force, torque = _vec(self.force), _vec(self.torque)
        if len(force) != 3 or len(torque) != 3:
            raise ValueError("wrench needs 3 force and 3 torque components")
        if not (np.all(np.isfinite(force)) and np.all(np.isfinite(torque))):
            raise ValueError("non-finite wrench")
        object.__setattr__(self, "force", force)
        object.__setattr__(self, "torque", torque)

    @classmethod
    def zero(cls) -> "Wrench":
        return cls()

    def as_array(self) -> np.ndarray:
        return np.array(self.force + self.torque)

    def force_norm(self) -> float:
        return float(np.linalg.norm(self.force))

    def is_zero(self) -> bool:
        return not np.any(self.as_array())


@dataclass(frozen=True)
class Step:
    state: State
    action: JointAction
    reward: float
    wrench: Wrench
    fallback: bool = False


@dataclass
class Trajectory:
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def append(self, step: Step):
        if self.steps and step.state.t != self.steps[-1].state.t + 1:
            raise ValueError("trajectory step indices must increase by 1")
        self.steps.append(step)

    def discounted_return(self, gamma: float) -> float:
        return float(sum(gamma**k * s.reward for k, s in enumerate(self.steps)))


def initial_state(params: EnvParams, rng: np.random.Generator) -> State:
    """Sample a start position uniformly from the lower half of each state interval."""
    lo, hi = params.lower, params.upper
    mid = lo + 0.5 * (hi - lo)
    u = rng.random(params.dims)
    return State(lo + u * (mid - lo), 0)


def thrust(params: EnvParams, u) -> np.ndarray:
    """Net push after static friction, applied per component."""
    u = np.asarray(u, dtype=float)
    return np.sign(u) * np.maximum(0.0, np.abs(u) - params.friction)


def reward(params: EnvParams, s: State, a: JointAction) -> float:
    distance = np.abs(np.asarray(s.position) - np.asarray(params.goal)).sum()
    effort = np.dot(a.robot, a.robot) + np.dot(a.human, a.human)
    return float(-distance - params.effort_weight * effort)


def step(params: EnvParams, s: State, a: JointAction) -> tuple[State, float]:
    if s.t >= params.horizon:
        raise HorizonExceededError(f"cannot step at t={s.t} with horizon {params.horizon}")
    u = np.asarray(a.robot) + np.asarray(a.human)
    pos = np.asarray(s.position) + params.dt * thrust(params, u)
    pos = np.clip(pos, params.lower, params.upper)
    return State(pos, s.t + 1), reward(params, s, a)


def _unpack_policy_output(out):
    if isinstance(out, tuple) and len(out) == 2 and isinstance(out[1], (bool, np.bool_)):
        return np.atleast_1d(np.asarray(out[0], dtype=float)), bool(out[1])
    return np.atleast_1d(np.asarray(out, dtype=float)), False


def rollout(
    params: EnvParams,
    robot_policy: Callable,
    human_model,
    learner_hook: Optional[Callable] = None,
    rng: Optional[np.random.Generator] = None,
    *,
    robot_grid=None,
    human_grid=None,
    start: Optional[State] = None,
) -> Trajectory:
    """Run one episode.

    ``robot_policy(state, prev_human_action, rng)`` returns a robot action, or
    ``(action, fallback_flag)``. ``human_model`` needs ``act(state, robot_action,
    rng)`` and ``wrench(state, joint_action)``; an optional ``advance()`` is
    called after every step (fatigue). ``learner_hook(state, action, wrench)``
    runs once per step. When grids are given, actions are checked against them.
    """
    rng = rng if rng is not None else np.random.default_rng()
    s = start if start is not None else initial_state(params, rng)
    prev_human = np.zeros(params.dims)
    traj = Trajectory()
    while s.t < params.horizon:
        a_r, flagged = _unpack_policy_output(robot_policy(s, prev_human, rng))
        if robot_grid is not None and not robot_grid.contains(a_r):
            raise InvalidActionError(f"robot action {a_r} is not on the robot grid")
        a_h = np.atleast_1d(np.asarray(human_model.act(s, a_r, rng), dtype=float))
        if human_grid is not None and not human_grid.contains(a_h):
            raise InvalidActionError(f"human action {a_h} is not on the human grid")
        a = JointAction(a_r, a_h)
        w = human_model.wrench(s, a)
        s_next, r = step(params, s, a)
        traj.append(Step(s, a, r, w, flagged))
        if learner_hook is not None:
            learner_hook(s, a, w)
        if hasattr(human_model, "advance"):
            human_model.advance()
        prev_human = a_h
        s = s_next
    return traj
