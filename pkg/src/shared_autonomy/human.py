"""Simulated human operator with a latent capability limit.

The capability is ground truth the learner never sees. The human picks actions
by a Boltzmann rule restricted to what it can physically deliver, and reacts
through its wrench on the object: proportional to its own effort while it can
keep up, with an extra corrective component near its comfort limit, and zero
once the joint task asks more of it than its capability allows.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DegenerateProfileError
from .game import JointAction, State, Wrench, _vec
from .jointq import QTable, boltzmann_dist, sample_action

CAP_ATOL = 1e-9


@dataclass(frozen=True)
class HumanProfile:
    capability: tuple = (0.4,)
    comfort_fraction: float = 0.75
    beta_h: float = 0.05
    corrective_gain: float = 20.0
    fatigue_rate: float = 0.0
    wrench_scale: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "capability", _vec(self.capability))
        if not all(c > 0 for c in self.capability):
            raise ConfigError("must be > 0", "human.capability")
        if not 0 < self.comfort_fraction <= 1:
            raise ConfigError("must lie in (0, 1]", "human.comfort_fraction")
        if not self.beta_h > 0:
            raise ConfigError("must be > 0", "human.beta_h")
        if not self.corrective_gain >= 0:
            raise ConfigError("must be >= 0", "human.corrective_gain")
        # rate 1 would zero the capability in one step
        if not 0 <= self.fatigue_rate < 1:
            raise ConfigError("must lie in [0, 1)", "human.fatigue_rate")
        if not self.wrench_scale > 0:
            raise ConfigError("must be > 0", "human.wrench_scale")


def capability_mask(actions: np.ndarray, capability) -> np.ndarray:
    """Grid actions the human can physically deliver (rows of ``actions``)."""
    return np.all(np.abs(actions) <= np.asarray(capability) + CAP_ATOL, axis=-1)


def human_action(q: QTable, s: State, a_r, profile: HumanProfile, rng: np.random.Generator):
    robot_index = q.grids.robot.index_of(a_r)
    mask = capability_mask(q.grids.human.actions, profile.capability)
    if not mask.any():
        raise DegenerateProfileError(
            f"capability {profile.capability} excludes every human grid action")
    dist = boltzmann_dist(q.human_slice(s, robot_index), profile.beta_h, mask)
    return q.grids.human.action(sample_action(dist, rng))


def is_engaged(profile: HumanProfile, a: JointAction, friction: float = 0.0) -> bool:
    """Whether the human can keep collaborating under joint action ``a``.

    The human drops out when asked for more than its capability: either its own
    action exceeds it, or the robot contributes so little along the human's push
    direction that overcoming static friction would need more than the human has.
    """
    h = np.asarray(a.human)
    r = np.asarray(a.robot)
    cap = np.asarray(profile.capability)
    if np.any(np.abs(h) > cap + CAP_ATOL):
        return False
    pushing = h != 0
    requested = friction - r * np.sign(h)
    return not np.any(pushing & (requested > cap + CAP_ATOL))


def human_wrench(profile: HumanProfile, s: State, a: JointAction, friction: float = 0.0) -> Wrench:
    if not is_engaged(profile, a, friction):
        return Wrench.zero()
    h = np.asarray(a.human)
    effort = float(np.linalg.norm(h))
    if effort == 0.0:
        return Wrench.zero()
    strain = float(np.max(np.abs(h) - profile.comfort_fraction * np.asarray(profile.capability)))
    magnitude = profile.wrench_scale * effort + profile.corrective_gain * max(0.0, strain)
    force = np.zeros(3)
    force[: h.size] = magnitude * h / effort
    return Wrench(force, (0.0, 0.0, 0.0))


def fatigue_step(profile: HumanProfile) -> HumanProfile:
    cap = tuple(c * (1.0 - profile.fatigue_rate) for c in profile.capability)
    return replace(profile, capability=cap)


class SimulatedHuman:
    """Stateful wrapper used by rollouts; fatigue accumulates per step."""

    def __init__(self, q: QTable, profile: HumanProfile, friction: float = 0.0):
        self.q = q
        self.initial_profile = profile
        self.profile = profile
        self.friction = friction

    def reset(self):
        self.profile = self.initial_profile

    def act(self, s, a_r, rng):
        return human_action(self.q, s, a_r, self.profile, rng)

    def wrench(self, s, a):
        return human_wrench(self.profile, s, a, self.friction)

    def advance(self):
        if self.profile.fatigue_rate > 0:
            self.profile = fatigue_step(self.profile)
