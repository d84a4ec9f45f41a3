"""Experiment orchestration, recovery evaluation and force/torque log analysis."""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, fields, is_dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .agent import robot_act, robot_dist
from .config import ExperimentConfig, config_echo
from .errors import ParseError, SharedAutonomyError
from .game import JointAction, State, rollout
from .human import HumanProfile, SimulatedHuman, human_wrench
from .jointq import Grids, QTable, backward_induction_q, make_grids
from .learner import (
    ConstraintModel,
    FeedbackLabel,
    TrustRegion,
    extract_trust_region,
    feedback_magnitude,
    label_feedback,
    robot_feasible_mask,
    save_checkpoint,
    sgd_step,
)

log = logging.getLogger(__name__)

FT_CHANNELS = ("fx", "fy", "fz", "tx", "ty", "tz")


class OutputError(SharedAutonomyError, OSError):
    exit_code = 3


@dataclass
class MetricsRow:
    episode: int
    reward: float
    mean_wrench_norm: float
    neg_labels: int
    boundary_est: float
    accuracy: Optional[float] = None


@dataclass
class FtStatRow:
    channel: str
    t: int
    mean: float
    std: float


# -- setup -------------------------------------------------------------------

def build_grids(cfg: ExperimentConfig) -> Grids:
    g = cfg.grid
    return make_grids(cfg.env, g.state_points, g.action_points,
                      (g.robot_low, g.robot_high), (g.human_low, g.human_high))


def build_q(cfg: ExperimentConfig) -> QTable:
    return backward_induction_q(cfg.env, build_grids(cfg), cfg.grid.q_beta)


def new_model(cfg: ExperimentConfig) -> ConstraintModel:
    lc = cfg.learner
    return ConstraintModel.zeros(cfg.env.dims, learn_rate=lc.lr, clamp_eps=lc.clamp_eps,
                                 quadratic=lc.quadratic, balance=lc.balance)


def reference_state(cfg: ExperimentConfig) -> State:
    """Centre of the initial-state distribution."""
    lo, hi = cfg.env.lower, cfg.env.upper
    return State(lo + 0.25 * (hi - lo), 0)


def reference_human_action(cfg: ExperimentConfig, profile: HumanProfile) -> np.ndarray:
    """A comfortable push: comfort_fraction * capability snapped onto the human grid."""
    g = cfg.grid
    step_ = (g.human_high - g.human_low) / (g.action_points - 1)
    target = profile.comfort_fraction * np.asarray(profile.capability)
    k = np.clip(np.floor((target - g.human_low) / step_ + 1e-9), 0, g.action_points - 1)
    return g.human_low + k * step_


def _robot_axis(cfg: ExperimentConfig, n: int) -> np.ndarray:
    """Robot actions along the diagonal of the robot box, shape (n, dims)."""
    values = np.linspace(cfg.grid.robot_low, cfg.grid.robot_high, n)
    return np.repeat(values[:, None], cfg.env.dims, axis=1)


def lower_edge(tr: TrustRegion, human, low: float, high: float) -> float:
    """Smallest robot action in [low, high] inside the region (diagonal for dims > 1).

    Linear 1-D models are solved in closed form; otherwise a fine scan is used.
    Returns ``high`` when nothing in the interval is inside.
    """
    high = min(high, float(np.min(tr.robot_upper)))
    if tr.model.dims == 1 and not tr.model.quadratic:
        normal, offset = tr.hyperplane
        w_r, w_h = normal
        rest = offset + w_h * float(np.atleast_1d(human)[0])
        if w_r > 0:
            return float(np.clip(-rest / w_r, low, high))
        if w_r == 0:
            return low if rest >= 0 else high
        return low if rest + w_r * low >= 0 else high
    grid = np.linspace(low, high, 10001)
    inside = robot_feasible_mask(tr, np.repeat(grid[:, None], tr.model.dims, 1), human)
    return float(grid[np.argmax(inside)]) if inside.any() else high


def capability_estimate(model: ConstraintModel, cfg: ExperimentConfig, profile: HumanProfile) -> float:
    """Human capability implied by the learned lower edge of the trust region.

    The human disengages once the robot leaves it more than its capability of the
    friction load, so a robot lower edge ``b`` corresponds to ``friction - b``.
    """
    tr = extract_trust_region(model, cfg.robot_upper, reference_state(cfg))
    a_h = reference_human_action(cfg, profile)
    return cfg.env.friction - lower_edge(tr, a_h, cfg.grid.robot_low, cfg.grid.robot_high)


def eval_recovery(model: ConstraintModel, profile: HumanProfile, cfg: ExperimentConfig,
                  grid_points: Optional[int] = None) -> tuple[float, float]:
    """(accuracy, boundary_error) of the learned region against the simulated ground truth.

    Robot actions are scanned over the robot box at the reference state and a
    comfortable human push. Ground truth is the labeler's verdict on the wrench
    the profile would emit, intersected with the robot limit.
    """
    n = cfg.eval_points if grid_points is None else grid_points
    s = reference_state(cfg)
    a_h = reference_human_action(cfg, profile)
    robot = _robot_axis(cfg, n)
    truth = np.array([
        label_feedback(human_wrench(profile, s, JointAction(r, a_h), cfg.env.friction),
                       cfg.labeler) == FeedbackLabel.POSITIVE
        for r in robot
    ])
    truth &= np.all(robot <= np.asarray(cfg.robot_upper), axis=1)
    tr = extract_trust_region(model, cfg.robot_upper, s)
    predicted = robot_feasible_mask(tr, robot, a_h)
    accuracy = float(np.mean(predicted == truth))
    error = abs(capability_estimate(model, cfg, profile) - float(np.min(profile.capability)))
    return accuracy, error


# -- experiment loop ---------------------------------------------------------

def run_replicate(cfg: ExperimentConfig, profile: HumanProfile, q: Optional[QTable] = None,
                  rng: Optional[np.random.Generator] = None):
    """One learning run against one profile. Returns (metrics rows, final model)."""
    q = build_q(cfg) if q is None else q
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    human = SimulatedHuman(q, profile, cfg.env.friction)
    learner = {"model": new_model(cfg)}
    region = {"model": learner["model"]}
    rows = []

    def policy(s, prev_human, rng_):
        model = learner["model"] if cfg.learner.refresh == "step" else region["model"]
        tr = extract_trust_region(model, cfg.robot_upper, s)
        dist = robot_dist(q, s, prev_human, tr, cfg.agent)
        return robot_act(q, dist, rng_), dist.fallback

    for episode in range(cfg.episodes):
        stats = {"neg": 0, "wrench": []}

        def hook(s, a, w):
            y = label_feedback(w, cfg.labeler)
            stats["neg"] += int(y == FeedbackLabel.NEGATIVE)
            magnitude = feedback_magnitude(w, cfg.labeler)
            if magnitude > 0:
                stats["wrench"].append(magnitude)
            if cfg.adaptive:
                m = learner["model"]
                learner["model"] = sgd_step(m, m.features(s, a), y)

        human.reset()
        region["model"] = learner["model"]
        traj = rollout(cfg.env, policy, human, hook, rng,
                       robot_grid=q.grids.robot, human_grid=q.grids.human)
        model = learner["model"]
        checkpoint = (episode + 1) % cfg.eval_every == 0 or episode + 1 == cfg.episodes
        accuracy = eval_recovery(model, profile, cfg)[0] if checkpoint else None
        rows.append(MetricsRow(
            episode=episode,
            reward=float(sum(step.reward for step in traj)),
            mean_wrench_norm=float(np.mean(stats["wrench"])) if stats["wrench"] else 0.0,
            neg_labels=stats["neg"],
            boundary_est=capability_estimate(model, cfg, profile),
            accuracy=accuracy,
        ))
    return rows, learner["model"]


def output_paths(cfg: ExperimentConfig, out_dir) -> dict:
    out_dir = Path(out_dir)
    if len(cfg.profiles) == 1:
        name = next(iter(cfg.profiles))
        return {name: (out_dir / "metrics.csv", out_dir / "model.ckpt")}
    return {name: (out_dir / f"metrics_{name}.csv", out_dir / f"model_{name}.ckpt")
            for name in cfg.profiles}


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Run every profile (same seed each) and write metrics CSV + checkpoint per profile."""
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {out_dir}: {exc}") from None
    q = build_q(cfg)
    echo = config_echo(cfg)
    results = {}
    for name, (metrics_path, ckpt_path) in output_paths(cfg, out_dir).items():
        rows, model = run_replicate(cfg, cfg.profiles[name], q)
        write_csv(rows, metrics_path, [f.name for f in fields(MetricsRow)])
        try:
            save_checkpoint(model, ckpt_path, {"profile": name, **echo})
        except OSError as exc:
            raise OutputError(f"cannot write {ckpt_path}: {exc}") from None
        results[name] = (rows, model)
    return results


# -- CSV ---------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(rows: Iterable, path, fieldnames: Optional[list] = None):
    rows = list(rows)
    if fieldnames is None:
        if not rows:
            raise ValueError("fieldnames are required to write an empty table")
        first = rows[0]
        fieldnames = [f.name for f in fields(first)] if is_dataclass(first) else list(first)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(fieldnames)
            for row in rows:
                data = asdict(row) if is_dataclass(row) else row
                if set(data) != set(fieldnames):
                    raise ValueError(f"row fields {sorted(data)} do not match header {fieldnames}")
                w.writerow([_fmt(data[k]) for k in fieldnames])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- force/torque logs -------------------------------------------------------

def load_ft_log(path) -> dict:
    """Parse a ``run,t,fx,fy,fz,tx,ty,tz`` log into {run: (t array, (n, 6) array)}."""
    runs: dict = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from None
    with fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and row[0].strip() == "run":
                if [c.strip() for c in row] != ["run", "t", *FT_CHANNELS]:
                    raise ParseError(f"unexpected header {row}", lineno)
                continue
            if len(row) != 8:
                raise ParseError(f"expected 8 fields, got {len(row)}", lineno)
            try:
                run = row[0].strip()
                t = int(row[1])
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if not np.all(np.isfinite(values)):
                raise ParseError("non-finite channel value", lineno)
            ts, vs = runs.setdefault(run, ([], []))
            if ts and t < ts[-1]:
                raise ParseError(f"timestamp {t} decreases within run {run!r}", lineno)
            ts.append(t)
            vs.append(values)
    return {run: (np.array(ts), np.array(vs)) for run, (ts, vs) in runs.items()}


def analyze_ft(log_path, n_runs: int) -> list[FtStatRow]:
    """Per-channel mean and sample std across runs, aligned by sample index.

    Runs are taken in order of first appearance and truncated to the shortest.
    """
    runs = load_ft_log(log_path)
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if len(runs) < n_runs:
        raise ParseError(f"log holds {len(runs)} runs, {n_runs} requested")
    chosen = list(runs.values())[:n_runs]
    length = min(len(ts) for ts, _ in chosen)
    if length == 0:
        raise ParseError("empty run")
    if any(len(ts) != length for ts, _ in chosen):
        log.warning("runs have unequal lengths; truncating to %d samples", length)
    stack = np.stack([vs[:length] for _, vs in chosen])  # (runs, time, channel)
    mean = stack.mean(axis=0)
    if n_runs == 1:
        log.warning("single run: standard deviation reported as zero")
        std = np.zeros_like(mean)
    else:
        std = stack.std(axis=0, ddof=1)
    t = chosen[0][0][:length]
    return [FtStatRow(ch, int(t[k]), float(mean[k, c]), float(std[k, c]))
            for c, ch in enumerate(FT_CHANNELS) for k in range(length)]


def write_ft_log(path, runs: dict):
    """Write {run_id: (n, 6) array} as an FT log with t = sample index."""
    rows = []
    for run, values in runs.items():
        for k, v in enumerate(np.asarray(values, dtype=float)):
            rows.append({"run": run, "t": k, **dict(zip(FT_CHANNELS, v))})
    write_csv(rows, path, ["run", "t", *FT_CHANNELS])
