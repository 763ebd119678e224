import numpy as np
import pytest

from mvpp.tbpls import DataPair


def latent_pair(seed, n=30, p=10, q=10, noise=0.3, policy="center_and_scale"):
    """One-factor two-view data with correlated latent scores plus noise."""
    rng = np.random.default_rng(seed)
    t = rng.standard_normal(n)
    s = 0.8 * t + 0.6 * rng.standard_normal(n)
    x = np.outer(t, rng.standard_normal(p)) + noise * rng.standard_normal((n, p))
    y = np.outer(s, rng.standard_normal(q)) + noise * rng.standard_normal((n, q))
    return DataPair.from_raw(x, y, policy)


@pytest.fixture
def pair30():
    return latent_pair(0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, shown after the test session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
