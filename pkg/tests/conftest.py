from pathlib import Path

import numpy as np
import pytest

from shared_autonomy.config import ExperimentConfig, load_config
from shared_autonomy.game import EnvParams
from shared_autonomy.harness import build_q
from shared_autonomy.jointq import backward_induction_q, make_grids

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def recovery_cfg() -> ExperimentConfig:
    return load_config(CONFIG_DIR / "recovery.cfg")


@pytest.fixture(scope="session")
def recovery_q(recovery_cfg):
    return build_q(recovery_cfg)


@pytest.fixture(scope="session")
def small_q():
    """Coarse table for quick policy tests: 11 states, 5-point action grids."""
    params = EnvParams(horizon=4)
    grids = make_grids(params, state_points=11, action_points=5)
    return backward_induction_q(params, grids, beta=0.5)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
