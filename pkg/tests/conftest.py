import os

import pytest
from hypothesis import HealthCheck, settings

from nullcone.background import BackgroundModel
from nullcone.sphere import get_grid

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def grid16():
    return get_grid(16)


@pytest.fixture(scope="session")
def grid24():
    return get_grid(24)


@pytest.fixture(scope="session")
def schw():
    return BackgroundModel.schwarzschild(1.0)


@pytest.fixture(scope="session")
def mink():
    return BackgroundModel.minkowski()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
