"""Robot policy: Boltzmann over Q restricted to the current trust region."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyTrustRegionError
from .game import JointAction, State
from .jointq import BoltzmannDist, QTable, boltzmann_dist, sample_action
from .learner import TrustRegion, robot_feasible_mask

CONDITIONING = ("previous-human-action", "marginalize-over-human-model")
FALLBACKS = ("unconstrained", "greedy-safe")


@dataclass(frozen=True)
class AgentConfig:
    beta_r: float = 0.05
    conditioning: str = "previous-human-action"
    fallback: str = "unconstrained"

    def __post_init__(self):
        if not self.beta_r > 0:
            raise ConfigError("must be > 0", "agent.beta_r")
        if self.conditioning not in CONDITIONING:
            raise ConfigError(f"must be one of {CONDITIONING}", "agent.conditioning")
        if self.fallback not in FALLBACKS:
            raise ConfigError(f"must be one of {FALLBACKS}", "agent.fallback")


def _robot_q(q: QTable, s: State, a_h_ref, cfg: AgentConfig, human_probs=None) -> np.ndarray:
    if cfg.conditioning == "marginalize-over-human-model" and human_probs is not None:
        return q.at(s) @ np.asarray(human_probs)
    return q.robot_slice(s, int(q.grids.human.nearest_index(np.atleast_1d(a_h_ref))))


def robot_dist(q: QTable, s: State, a_h_ref, tr: TrustRegion, cfg: AgentConfig,
               human_probs=None) -> BoltzmannDist:
    """Masked Boltzmann over the robot grid.

    Robot actions whose pairing with ``a_h_ref`` leaves the trust region get
    probability zero. ``human_probs`` (a distribution over the human grid) is
    used instead of ``a_h_ref`` for the Q values under marginal conditioning.
    When nothing survives the mask ``cfg.fallback`` decides: ``unconstrained``
    returns the unmasked distribution flagged with ``fallback=True``;
    ``greedy-safe`` puts all mass on the robot action with the largest
    trust-region score.
    """
    q_slice = _robot_q(q, s, a_h_ref, cfg, human_probs)
    actions = q.grids.robot.actions
    mask = robot_feasible_mask(tr.at(s), actions, a_h_ref)
    try:
        return boltzmann_dist(q_slice, cfg.beta_r, mask)
    except EmptyTrustRegionError:
        if cfg.fallback == "unconstrained":
            d = boltzmann_dist(q_slice, cfg.beta_r)
            return BoltzmannDist(d.support, d.probs, d.beta, fallback=True)
        local = tr.at(s)
        scores = np.array([local.score(JointAction(a_r, a_h_ref)) for a_r in actions])
        scores[np.any(actions > tr.robot_upper, axis=1)] = -np.inf
        if np.all(np.isneginf(scores)):
            scores = -np.abs(actions - tr.robot_upper).sum(axis=1)
        probs = np.zeros(actions.shape[0])
        probs[int(np.argmax(scores))] = 1.0
        return BoltzmannDist(np.arange(probs.size), probs, cfg.beta_r, fallback=True)


def robot_act(q: QTable, dist: BoltzmannDist, rng: np.random.Generator) -> np.ndarray:
    return q.grids.robot.action(sample_action(dist, rng))
