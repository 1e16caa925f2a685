import numpy as np
import pytest

from blochgreen import bloch, profiles

ACCEPTANCE_LINES = {}


def record(criterion, passed, detail):
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def heat():
    return profiles.heat_profile()


@pytest.fixture(scope="session")
def advdiff():
    return profiles.advection_diffusion_profile(1.0)


@pytest.fixture(scope="session")
def manufactured():
    return profiles.manufactured_fixture()


@pytest.fixture(scope="session")
def manufactured_sym():
    return profiles.manufactured_fixture(a=0.0)


@pytest.fixture(scope="session")
def manufactured_branch(manufactured):
    return bloch.critical_branch(manufactured)


@pytest.fixture(scope="session")
def advdiff_branch(advdiff):
    return bloch.critical_branch(advdiff)


@pytest.fixture(scope="session")
def heat_branch(heat):
    return bloch.critical_branch(heat)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
