"""Joint action-value function over discretised grids.

Q is computed by finite-horizon backward induction. The continuation after the
first step is the *unconstrained* joint Boltzmann policy over both agents'
actions at the same temperature; constraints only enter at action selection.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ConfigError, EmptyTrustRegionError
from .game import EnvParams, JointAction, State, step, thrust

GRID_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class ActionGrid:
    """Uniform grid of scalar values, replicated across ``dims`` axes.

    Multi-axis actions are flattened in C order of the per-axis indices.
    """

    points: np.ndarray
    dims: int = 1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ConfigError("grid needs at least 2 points")
        diffs = np.diff(pts)
        if np.any(diffs <= 0):
            raise ConfigError("grid points must be strictly increasing")
        if not np.allclose(diffs, diffs[0], rtol=1e-9, atol=1e-12):
            raise ConfigError("grid spacing must be uniform")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, low: float, high: float, n: int, dims: int = 1) -> "ActionGrid":
        if n < 2:
            raise ConfigError("grid needs at least 2 points")
        return cls(np.linspace(low, high, int(n)), dims)

    @property
    def spacing(self) -> float:
        return float(self.points[1] - self.points[0])

    @property
    def size(self) -> int:
        return self.points.size**self.dims

    @property
    def actions(self) -> np.ndarray:
        """All grid actions, shape (size, dims)."""
        return np.array(list(itertools.product(self.points, repeat=self.dims)))

    def nearest_axis_index(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        idx = np.rint((values - self.points[0]) / self.spacing).astype(int)
        return np.clip(idx, 0, self.points.size - 1)

    def nearest_index(self, values) -> np.ndarray:
        """Flat index of the nearest grid action (broadcasts over leading axes)."""
        axis_idx = self.nearest_axis_index(values)
        shape = (self.points.size,) * self.dims
        return np.ravel_multi_index(tuple(np.moveaxis(axis_idx, -1, 0)), shape)

    def index_of(self, action) -> int:
        action = np.atleast_1d(np.asarray(action, dtype=float))
        if not self.contains(action):
            raise ValueError(f"{action} is not a grid action")
        return int(self.nearest_index(action))

    def contains(self, action) -> bool:
        action = np.atleast_1d(np.asarray(action, dtype=float))
        if action.shape != (self.dims,):
            return False
        snapped = self.points[self.nearest_axis_index(action)]
        return bool(np.all(np.abs(snapped - action) <= GRID_ATOL))

    def action(self, index: int) -> np.ndarray:
        axis_idx = np.unravel_index(int(index), (self.points.size,) * self.dims)
        return self.points[list(axis_idx)]


class Grids(NamedTuple):
    state: ActionGrid
    robot: ActionGrid
    human: ActionGrid


def make_grids(params: EnvParams, state_points=101, action_points=21,
               robot_bounds=(0.0, 1.0), human_bounds=(0.0, 1.0)) -> Grids:
    lo, hi = params.state_bounds[0]
    if any(b != params.state_bounds[0] for b in params.state_bounds):
        raise ConfigError("multi-axis state grids need identical bounds", "env.state_bounds")
    if lo == hi:
        raise ConfigError("state grid needs a non-degenerate interval", "env.state_bounds")
    return Grids(
        ActionGrid.uniform(lo, hi, state_points, params.dims),
        ActionGrid.uniform(*robot_bounds, action_points, params.dims),
        ActionGrid.uniform(*human_bounds, action_points, params.dims),
    )


@dataclass(frozen=True, eq=False)
class QTable:
    values: np.ndarray  # (state, t, robot, human)
    grids: Grids
    gamma: float
    horizon: int
    beta: float

    def state_index(self, s: State) -> int:
        return int(self.grids.state.nearest_index(np.asarray(s.position)))

    def at(self, s: State, t: Optional[int] = None) -> np.ndarray:
        """Q matrix (robot x human) at the grid state nearest to ``s``."""
        t = s.t if t is None else t
        return self.values[self.state_index(s), t]

    def robot_slice(self, s: State, human_index: int) -> np.ndarray:
        return self.at(s)[:, human_index]

    def human_slice(self, s: State, robot_index: int) -> np.ndarray:
        return self.at(s)[robot_index, :]

    def dump_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["state_idx", "t", "aR_idx", "aH_idx", "value"])
            for idx in np.ndindex(self.values.shape):
                w.writerow([*idx, repr(float(self.values[idx]))])


def _softmax(q: np.ndarray, beta: float, axis=-1) -> np.ndarray:
    z = (q - q.max(axis=axis, keepdims=True)) / beta
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def transition_tables(params: EnvParams, grids: Grids):
    """Reward and next-state index for every (state, robot, human) grid triple."""
    S = grids.state.actions[:, None, None, :]
    u = grids.robot.actions[None, :, None, :] + grids.human.actions[None, None, :, :]
    pos = np.clip(S + params.dt * thrust(params, u), params.lower, params.upper)
    nxt = grids.state.nearest_index(pos)
    dist = np.abs(S - np.asarray(params.goal)).sum(axis=-1)
    effort = ((grids.robot.actions**2).sum(-1)[None, :, None]
              + (grids.human.actions**2).sum(-1)[None, None, :])
    R = -dist - params.effort_weight * effort
    return R, nxt


def backward_induction_q(params: EnvParams, grids: Grids, beta: float = 1.0) -> QTable:
    if beta <= 0:
        raise ConfigError("must be > 0", "beta")
    for name, g in zip(("state", "robot", "human"), grids):
        if g is None or g.size == 0:
            raise ConfigError("empty grid", f"grid.{name}")
    R, nxt = transition_tables(params, grids)
    ns, nr, nh = R.shape
    T = params.horizon
    Q = np.empty((ns, T, nr, nh))
    Q[:, T - 1] = R
    for t in range(T - 2, -1, -1):
        q_next = Q[:, t + 1].reshape(ns, -1)
        v_next = (_softmax(q_next, beta) * q_next).sum(axis=1)
        Q[:, t] = R + params.gamma * v_next[nxt]
    if not np.all(np.isfinite(Q)):
        raise ArithmeticError("non-finite Q values")
    Q.setflags(write=False)
    return QTable(Q, grids, params.gamma, T, beta)


@dataclass(frozen=True, eq=False)
class BoltzmannDist:
    support: np.ndarray
    probs: np.ndarray
    beta: float
    fallback: bool = False

    def __len__(self):
        return self.probs.size


def boltzmann_dist(q_slice, beta: float, feasible_mask=None) -> BoltzmannDist:
    """probs_i proportional to exp(Q_i / beta) on feasible indices, exactly 0 elsewhere."""
    q = np.asarray(q_slice, dtype=float)
    if beta <= 0:
        raise ValueError("beta must be > 0")
    if not np.all(np.isfinite(q)):
        raise ValueError("Q slice must be finite")
    mask = np.ones(q.shape, dtype=bool) if feasible_mask is None else np.asarray(feasible_mask, bool)
    if not mask.any():
        raise EmptyTrustRegionError("no feasible action: the trust region is empty")
    # normalise over the survivors only, then scatter back with exact zeros
    survivors = q[mask]
    e = np.exp((survivors - survivors.max()) / beta)
    probs = np.zeros(q.shape)
    probs[mask] = e / e.sum()
    return BoltzmannDist(np.arange(q.size), probs, float(beta))


def sample_action(dist: BoltzmannDist, rng: np.random.Generator) -> int:
    """Inverse-CDF draw restricted to strictly positive-probability entries."""
    pos = np.flatnonzero(dist.probs > 0)
    cdf = np.cumsum(dist.probs[pos])
    u = rng.random() * cdf[-1]
    k = min(int(np.searchsorted(cdf, u, side="right")), pos.size - 1)
    return int(dist.support[pos[k]])


def joint_boltzmann_policy(q: QTable, beta: Optional[float] = None) -> Callable:
    """Unconstrained joint Boltzmann policy over (robot, human) grid pairs."""
    beta = q.beta if beta is None else beta
    nh = q.grids.human.size
    robot, human = q.grids.robot.actions, q.grids.human.actions
    cache: dict = {}

    def policy(s: State, rng: np.random.Generator) -> JointAction:
        dist = cache.get((s.position, s.t))
        if dist is None:
            q_joint = q.values[q.state_index(s), s.t].ravel()
            dist = cache[(s.position, s.t)] = boltzmann_dist(q_joint, beta)
        flat = sample_action(dist, rng)
        return JointAction(robot[flat // nh], human[flat % nh])

    return policy


def mc_q_oracle(params: EnvParams, policy: Callable, s: State, a: JointAction, t: int,
                n_samples: int, rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo estimate of the discounted return from taking ``a`` in ``s`` at ``t``.

    ``policy(state, rng)`` supplies the joint action for every later step.
    Returns (mean, standard error).
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    returns = np.empty(n_samples)
    start = State(s.position, t)
    for n in range(n_samples):
        cur, r = step(params, start, a)
        total, disc = r, 1.0
        while cur.t < params.horizon:
            disc *= params.gamma
            cur, r = step(params, cur, policy(cur, rng))
            total += disc * r
        returns[n] = total
    if np.all(returns == returns[0]):
        # exact for deterministic returns; the general formulas pick up rounding
        return float(returns[0]), 0.0
    return float(returns.mean()), float(returns.std(ddof=1) / np.sqrt(n_samples))
