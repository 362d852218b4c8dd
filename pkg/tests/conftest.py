import warnings

import numpy as np
import pytest

from choquard.field import make_grid
from choquard.limit import solve_ground_state
from choquard.nonlinearity import Nonlinearity
from choquard.riesz import PeriodicImageWarning, RieszOperator


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def grid32():
    return make_grid(32, 8.0)


@pytest.fixture(scope="session")
def grid64():
    return make_grid(64, 16.0)


@pytest.fixture(scope="session")
def power():
    return Nonlinearity.power(2.5)


@pytest.fixture(scope="session")
def ground_state(grid64, power):
    """a = 1, alpha = 2, p = 2.5 on the default 64^3 grid."""
    return solve_ground_state(1.0, power, RieszOperator(2.0, grid64))


@pytest.fixture(autouse=True)
def _quiet_periodic_images():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PeriodicImageWarning)
        yield


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
