import numpy as np
import pytest

from dispersive_profiles.field import GridSpec

# Lines recorded by the acceptance suite, echoed at the end of the session.
ACCEPTANCE_LINES: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid1():
    return GridSpec(1, 256, 100.0)


@pytest.fixture
def grid2():
    return GridSpec(2, 64, 60.0)
