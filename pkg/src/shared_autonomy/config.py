"""Experiment configuration: flat ``section.key = value`` text files.

Lines starting with ``#`` are comments. Vectors are whitespace or comma
separated. Human profiles are either given directly (``human.capability``)
or by name (``human.<name>.capability``); every named profile is run as its
own replicate with the same seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .agent import AgentConfig
from .errors import ConfigError
from .game import EnvParams
from .human import HumanProfile
from .learner import LabelerConfig


@dataclass(frozen=True)
class GridConfig:
    state_points: int = 101
    action_points: int = 21
    robot_low: float = 0.0
    robot_high: float = 1.0
    # no zero point: a collaborating human always exerts at least a holding force
    human_low: float = 0.05
    human_high: float = 1.05
    q_beta: float = 0.05

    def __post_init__(self):
        if self.state_points < 2:
            raise ConfigError("must be >= 2", "grid.state_points")
        if self.action_points < 2:
            raise ConfigError("must be >= 2", "grid.action_points")
        if not self.robot_low < self.robot_high:
            raise ConfigError("robot_low must be below robot_high", "grid.robot_low")
        if not self.human_low < self.human_high:
            raise ConfigError("human_low must be below human_high", "grid.human_low")
        if not self.q_beta > 0:
            raise ConfigError("must be > 0", "grid.q_beta")


@dataclass(frozen=True)
class LearnerConfig:
    lr: float = 0.05
    clamp_eps: float = 1e-7
    quadratic: bool = False
    balance: bool = False
    refresh: str = "step"

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError("must be > 0", "learner.lr")
        if not 0 < self.clamp_eps < 0.5:
            raise ConfigError("must lie in (0, 0.5)", "learner.clamp_eps")
        if self.refresh not in ("step", "episode"):
            raise ConfigError("must be 'step' or 'episode'", "learner.refresh")


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvParams = field(default_factory=EnvParams)
    profiles: dict = field(default_factory=lambda: {"default": HumanProfile()})
    labeler: LabelerConfig = field(default_factory=LabelerConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    robot_upper: tuple = ()
    episodes: int = 300
    seed: int = 0
    adaptive: bool = True
    eval_every: int = 50
    eval_points: int = 10001

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigError("must be >= 1", "experiment.episodes")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("must be an unsigned 64-bit integer", "experiment.seed")
        if self.eval_every < 1:
            raise ConfigError("must be >= 1", "experiment.eval_every")
        if self.eval_points < 2:
            raise ConfigError("must be >= 2", "experiment.eval_points")
        if not self.profiles:
            raise ConfigError("at least one human profile is required", "human")
        if not self.robot_upper:
            object.__setattr__(self, "robot_upper", (self.grid.robot_high,) * self.env.dims)
        if len(self.robot_upper) != self.env.dims:
            raise ConfigError(f"expected {self.env.dims} components", "agent.robot_upper")
        for name, p in self.profiles.items():
            if len(p.capability) != self.env.dims:
                raise ConfigError(f"expected {self.env.dims} components", f"human.{name}.capability")

    @property
    def profile(self) -> HumanProfile:
        return next(iter(self.profiles.values()))

    def with_profile(self, profile: HumanProfile, name: str = "default") -> "ExperimentConfig":
        return replace(self, profiles={name: profile})


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_vector(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _parse_int(text: str) -> int:
    return int(text, 0)


_ENV_KEYS = {
    "dt": float, "goal": _parse_vector, "friction": float, "effort_weight": float,
    "gamma": float, "horizon": _parse_int, "dims": _parse_int, "state_bounds": _parse_vector,
}
_PROFILE_KEYS = {
    "capability": _parse_vector, "comfort_fraction": float, "beta_h": float,
    "corrective_gain": float, "fatigue_rate": float, "wrench_scale": float,
}
_SECTIONS = {
    "labeler": (LabelerConfig, {"delta": float, "torque_weight": float}),
    "learner": (LearnerConfig, {"lr": float, "clamp_eps": float, "quadratic": _parse_bool,
                                "balance": _parse_bool, "refresh": str}),
    "agent": (AgentConfig, {"beta_r": float, "conditioning": str, "fallback": str}),
    "grid": (GridConfig, {f.name: (int if f.type == "int" else float) for f in fields(GridConfig)}),
}
_EXPERIMENT_KEYS = {
    "episodes": _parse_int, "seed": _parse_int, "adaptive": _parse_bool,
    "eval_every": _parse_int, "eval_points": _parse_int,
}


def parse_config_text(text: str) -> ExperimentConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key", key)
        raw[key] = value
    return config_from_mapping(raw)


def _convert(key, parser, value):
    try:
        return parser(value)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {value!r}: {exc}", key) from None


def config_from_mapping(raw: dict) -> ExperimentConfig:
    env_kw, sections, experiment = {}, {name: {} for name in _SECTIONS}, {}
    profiles: dict = {}
    robot_upper = ()
    for key, value in raw.items():
        section, _, rest = key.partition(".")
        if section == "env" and rest in _ENV_KEYS:
            env_kw[rest] = _convert(key, _ENV_KEYS[rest], value)
        elif section == "human" and rest:
            name, _, fld = rest.rpartition(".")
            if fld not in _PROFILE_KEYS or "." in name:
                raise ConfigError("unknown key", key)
            profiles.setdefault(name, {})[fld] = _convert(key, _PROFILE_KEYS[fld], value)
        elif section == "agent" and rest == "robot_upper":
            robot_upper = _convert(key, _parse_vector, value)
        elif section in _SECTIONS and rest in _SECTIONS[section][1]:
            sections[section][rest] = _convert(key, _SECTIONS[section][1][rest], value)
        elif section == "experiment" and rest in _EXPERIMENT_KEYS:
            experiment[rest] = _convert(key, _EXPERIMENT_KEYS[rest], value)
        else:
            raise ConfigError("unknown key", key)
    if "" in profiles and len(profiles) > 1:
        raise ConfigError("mix of named and unnamed profile keys", "human")
    if "state_bounds" in env_kw:
        flat = env_kw["state_bounds"]
        if len(flat) % 2:
            raise ConfigError("needs low/high pairs", "env.state_bounds")
        env_kw["state_bounds"] = tuple(zip(flat[0::2], flat[1::2]))
    dims = env_kw.get("dims", 1)
    if "goal" not in env_kw and dims != 1:
        env_kw["goal"] = (1.0,) * dims
    if "state_bounds" not in env_kw and dims != 1:
        env_kw["state_bounds"] = ((0.0, 1.0),) * dims
    env = EnvParams(**env_kw)
    built = {name: cls(**sections[name]) for name, (cls, _) in _SECTIONS.items()}
    if not profiles:
        profiles = {"": {}}
    if "" in profiles:
        profiles["default"] = profiles.pop("")
    named = {}
    for name, kw in profiles.items():
        kw.setdefault("capability", (0.4,) * env.dims)
        named[name] = HumanProfile(**kw)
    return ExperimentConfig(env=env, profiles=named, robot_upper=robot_upper, **built, **experiment)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "config") from None
    return parse_config_text(text)


def config_echo(cfg: ExperimentConfig) -> dict:
    """Flat key/value view of ``cfg`` (round-trips through ``config_from_mapping``)."""
    def fmt(v):
        if isinstance(v, bool):
            return str(v).lower()
        if isinstance(v, float):
            return repr(v)
        if isinstance(v, tuple):
            return " ".join(fmt(x) for x in v)
        return str(v)

    env = cfg.env
    out = {
        "env.dt": env.dt, "env.goal": env.goal, "env.friction": env.friction,
        "env.effort_weight": env.effort_weight, "env.gamma": env.gamma,
        "env.horizon": env.horizon, "env.dims": env.dims,
        "env.state_bounds": tuple(v for pair in env.state_bounds for v in pair),
    }
    for name, p in cfg.profiles.items():
        for f in fields(HumanProfile):
            out[f"human.{name}.{f.name}"] = getattr(p, f.name)
    for section, obj in (("labeler", cfg.labeler), ("learner", cfg.learner),
                         ("agent", cfg.agent), ("grid", cfg.grid)):
        for f in fields(obj):
            out[f"{section}.{f.name}"] = getattr(obj, f.name)
    out["agent.robot_upper"] = cfg.robot_upper
    for key in _EXPERIMENT_KEYS:
        out[f"experiment.{key}"] = getattr(cfg, key)
    return {k: fmt(v) for k, v in out.items()}
