from __future__ import annotations

import numpy as np
import pytest

from smilewa import family_bounded_skew, family_flat, family_w_shape

# Lines appended by the acceptance module; echoed in the terminal summary so
# they survive output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def flat():
    return family_flat(0.2)


@pytest.fixture(scope="session")
def bounded():
    return family_bounded_skew(0.1, 0.7)


@pytest.fixture(scope="session")
def wshape():
    return family_w_shape(0.7, 0.02, 0.9)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
