import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pendulum_vpg.environment import EpisodeTrace  # noqa: E402
from pendulum_vpg.policy import init_policy  # noqa: E402
from pendulum_vpg.training import TrainingConfig, train  # noqa: E402


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)


def random_trace(rng, length, hidden=8):
    """Synthetic trace: random states and raw actions, no dynamics."""
    states = rng.normal(0.0, 0.5, (length, 4))
    raw = rng.normal(0.0, 2.0, length)
    return EpisodeTrace(states, states, raw, np.clip(raw, -10, 10), np.ones(length), False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_policy():
    return init_policy(8, np.random.default_rng(5))


@pytest.fixture(scope="session")
def converged_result():
    """A policy trained until ten consecutive episodes survive."""
    result = train(TrainingConfig(seed=6, success_streak=10, max_trials=5000))
    assert result.succeeded
    return result


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
