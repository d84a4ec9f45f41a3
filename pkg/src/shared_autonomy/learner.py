"""Online learning of the human-constraint surface from wrench feedback.

Each interaction step is labelled by thresholding the human's wrench: a wrench
above ``delta`` means the human is engaged, so the joint action lies inside the
trust region; anything at or below it means the human is not collaborating.
A logistic unit over [state, robot action, human action, 1] is fitted online
with binary cross-entropy; its decision boundary is the learned lower bound of
the trust region, the robot's actuator limit the upper bound.

The wrench produces the label and is therefore not a model input.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional

import numpy as np
from scipy.special import expit

from .errors import ConfigError, NumericError, ParseError
from .game import JointAction, State, Wrench


class FeedbackLabel(IntEnum):
    NEGATIVE = 0
    POSITIVE = 1


@dataclass(frozen=True)
class LabelerConfig:
    delta: float = 0.05
    torque_weight: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("must be > 0", "labeler.delta")
        if not self.torque_weight >= 0:
            raise ConfigError("must be >= 0", "labeler.torque_weight")


def feedback_magnitude(w: Wrench, cfg: LabelerConfig) -> float:
    combined = np.concatenate([w.force, cfg.torque_weight * np.asarray(w.torque)])
    return float(np.linalg.norm(combined))


def label_feedback(w: Wrench, cfg: LabelerConfig) -> FeedbackLabel:
    if feedback_magnitude(w, cfg) > cfg.delta:
        return FeedbackLabel.POSITIVE
    return FeedbackLabel.NEGATIVE


def feature_dim(dims: int, quadratic: bool = False) -> int:
    return 3 * dims + (2 * dims if quadratic else 0) + 1


def featurize(s: State, a: JointAction, dims: Optional[int] = None,
              quadratic: bool = False) -> np.ndarray:
    """[position, robot, human, (robot**2, human**2,) 1]."""
    pos, r, h = (np.asarray(v, dtype=float) for v in (s.position, a.robot, a.human))
    dims = pos.size if dims is None else dims
    if not pos.size == r.size == h.size == dims:
        raise ConfigError(
            f"dimension mismatch: state {pos.size}, robot {r.size}, human {h.size}, expected {dims}")
    parts = [pos, r, h]
    if quadratic:
        parts += [r * r, h * h]
    parts.append(np.ones(1))
    return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class ConstraintModel:
    weights: np.ndarray
    learn_rate: float = 0.05
    clamp_eps: float = 1e-7
    samples_seen: int = 0
    dims: int = 1
    quadratic: bool = False
    balance: bool = False
    class_counts: tuple = (0, 0)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.size != feature_dim(self.dims, self.quadratic):
            raise ConfigError(f"expected {feature_dim(self.dims, self.quadratic)} weights, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise NumericError("non-finite model weights")
        if not self.learn_rate > 0:
            raise ConfigError("must be > 0", "learner.lr")
        if not 0 < self.clamp_eps < 0.5:
            raise ConfigError("must lie in (0, 0.5)", "learner.clamp_eps")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, dims: int = 1, **kwargs) -> "ConstraintModel":
        return cls(np.zeros(feature_dim(dims, kwargs.get("quadratic", False))), dims=dims, **kwargs)

    @property
    def trained(self) -> bool:
        return self.samples_seen > 0 and bool(np.any(self.weights))

    def features(self, s: State, a: JointAction) -> np.ndarray:
        return featurize(s, a, self.dims, self.quadratic)


def predict_in_region(model: ConstraintModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size != model.weights.size:
        raise ConfigError(f"feature length {x.size} != model dimension {model.weights.size}")
    return float(expit(np.dot(model.weights, x)))


def bce_loss(p: float, y, eps: float = 1e-7) -> float:
    p_hat = min(max(float(p), eps), 1.0 - eps)
    y = int(y)
    return float(-(y * np.log(p_hat) + (1 - y) * np.log1p(-p_hat)))


def bce_gradient(model: ConstraintModel, x, y) -> np.ndarray:
    """d/dtheta of bce(sigmoid(theta.x), y), ignoring the clamp."""
    x = np.asarray(x, dtype=float)
    return (predict_in_region(model, x) - int(y)) * x


def sgd_step(model: ConstraintModel, x, y) -> ConstraintModel:
    y = int(y)
    pos, neg = model.class_counts
    pos, neg = (pos + 1, neg) if y else (pos, neg + 1)
    weight = 1.0
    if model.balance:
        weight = (pos + neg) / (2.0 * (pos if y else neg))
    grad = weight * bce_gradient(model, x, y)
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient {grad} at weights {model.weights}, x={x}, y={y}")
    return replace(model, weights=model.weights - model.learn_rate * grad,
                   samples_seen=model.samples_seen + 1, class_counts=(pos, neg))


@dataclass(frozen=True, eq=False)
class TrustRegion:
    """Learned joint-action region at a query state.

    The lower side is the set where the logistic score g(s, a) >= 0; the upper
    side is the robot's per-axis limit.
    """

    model: ConstraintModel
    robot_upper: np.ndarray
    state: Optional[State] = None
    trained: bool = False

    def at(self, s: State) -> "TrustRegion":
        return replace(self, state=s)

    def _state(self) -> State:
        if self.state is not None:
            return self.state
        return State(np.zeros(self.model.dims), 0)

    @property
    def hyperplane(self) -> tuple[np.ndarray, float]:
        """(normal over [robot, human] coordinates, offset at the query state); linear models."""
        w = self.model.weights
        d = self.model.dims
        offset = float(np.dot(w[:d], self._state().position) + w[-1])
        return w[d:3 * d].copy(), offset

    def score(self, a: JointAction) -> float:
        return float(np.dot(self.model.weights, self.model.features(self._state(), a)))

    def robot_boundary(self, human, axis: int = 0) -> float:
        """Robot action on the decision boundary along ``axis`` (1-D linear models).

        Returns nan when the robot weight is zero.
        """
        normal, offset = self.hyperplane
        d = self.model.dims
        h = np.atleast_1d(np.asarray(human, dtype=float))
        w_r = normal[axis]
        if w_r == 0:
            return float("nan")
        rest = offset + np.dot(normal[d:], h)
        return float(-rest / w_r)


def extract_trust_region(model: ConstraintModel, robot_upper, state: Optional[State] = None) -> TrustRegion:
    upper = np.atleast_1d(np.asarray(robot_upper, dtype=float))
    if upper.size != model.dims:
        raise ConfigError(f"robot_upper has {upper.size} components, model has {model.dims} dims")
    if not np.all(np.isfinite(upper)):
        raise ConfigError("robot_upper must be finite", "agent.robot_upper")
    upper.setflags(write=False)
    return TrustRegion(model, upper, state, model.trained)


def region_contains(tr: TrustRegion, a: JointAction) -> bool:
    if np.any(np.asarray(a.robot) > tr.robot_upper):
        return False
    # thresholding the probability keeps membership identical to predict_in_region >= 0.5
    return bool(expit(tr.score(a)) >= 0.5)


def robot_feasible_mask(tr: TrustRegion, robot_actions: np.ndarray, human) -> np.ndarray:
    """Vectorised ``region_contains`` over rows of ``robot_actions`` paired with ``human``."""
    m = tr.model
    d = m.dims
    n = robot_actions.shape[0]
    s = tr._state()
    h = np.broadcast_to(np.atleast_1d(np.asarray(human, dtype=float)), (n, d))
    cols = [np.broadcast_to(np.asarray(s.position), (n, d)), robot_actions, h]
    if m.quadratic:
        cols += [robot_actions**2, h**2]
    cols.append(np.ones((n, 1)))
    scores = np.hstack(cols) @ m.weights
    inside_box = np.all(robot_actions <= tr.robot_upper, axis=1)
    return inside_box & (expit(scores) >= 0.5)


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(model: ConstraintModel, path, echo: Optional[dict] = None):
    lines = [
        f"dimension = {model.weights.size}",
        "weights = " + " ".join(repr(float(w)) for w in model.weights),
        f"samples_seen = {model.samples_seen}",
        f"learn_rate = {model.learn_rate!r}",
        f"clamp_eps = {model.clamp_eps!r}",
        f"dims = {model.dims}",
        f"quadratic = {str(model.quadratic).lower()}",
        f"balance = {str(model.balance).lower()}",
        f"class_counts = {model.class_counts[0]} {model.class_counts[1]}",
    ]
    for key, value in (echo or {}).items():
        lines.append(f"config.{key} = {value}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[ConstraintModel, dict]:
    fields = {}
    echo = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected 'key = value': {line!r}", lineno)
            key, value = (part.strip() for part in line.split("=", 1))
            if key.startswith("config."):
                echo[key[len("config."):]] = value
            else:
                fields[key] = value
    try:
        weights = np.array([float(v) for v in fields["weights"].split()])
        if weights.size != int(fields["dimension"]):
            raise ParseError("weights length does not match dimension")
        model = ConstraintModel(
            weights,
            learn_rate=float(fields["learn_rate"]),
            clamp_eps=float(fields["clamp_eps"]),
            samples_seen=int(fields["samples_seen"]),
            dims=int(fields["dims"]),
            quadratic=fields["quadratic"] == "true",
            balance=fields["balance"] == "true",
            class_counts=tuple(int(v) for v in fields["class_counts"].split()),
        )
    except KeyError as exc:
        raise ParseError(f"checkpoint missing key {exc.args[0]}") from None
    return model, echo
