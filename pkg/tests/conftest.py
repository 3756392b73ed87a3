import warnings

import numpy as np
import pytest

from swidopt.optimize import DegenerateThresholdWarning

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _quiet_degenerate():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateThresholdWarning)
        yield
