import numpy as np
import pytest

from portvar.model import UtilityModel

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def markowitz():
    # E = (0.08, 0.06), V = (0.04, 0.02), L = E - V / 2
    return UtilityModel.from_arrays([[0.08, 0.04], [0.06, 0.02]], [1.0, -0.5])


@pytest.fixture
def curve_k():
    return np.array([[2.0, 1.0, 7.0], [5.0, 2.0, 1.0]])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
