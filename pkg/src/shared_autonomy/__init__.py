"""Shared-autonomy simulation: an assistive robot learns a human's physical
limits online from wrench feedback and keeps its Boltzmann policy inside the
learned trust region."""

from .agent import AgentConfig, robot_act, robot_dist
from .config import ExperimentConfig, GridConfig, LearnerConfig, load_config, parse_config_text
from .game import EnvParams, JointAction, State, Trajectory, Wrench, initial_state, reward, rollout, step
from .harness import MetricsRow, analyze_ft, eval_recovery, run_experiment, write_csv
from .human import HumanProfile, fatigue_step, human_action, human_wrench
from .jointq import (
    ActionGrid,
    BoltzmannDist,
    Grids,
    QTable,
    backward_induction_q,
    boltzmann_dist,
    make_grids,
    mc_q_oracle,
    sample_action,
)
from .learner import (
    ConstraintModel,
    FeedbackLabel,
    LabelerConfig,
    TrustRegion,
    bce_loss,
    extract_trust_region,
    featurize,
    label_feedback,
    predict_in_region,
    region_contains,
    sgd_step,
)

__version__ = "0.1.0"
