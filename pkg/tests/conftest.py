import pytest
from hypothesis import HealthCheck, settings

from cmslab import builtins as bi

settings.register_profile("lab", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def decimal():
    return bi.decimal()


@pytest.fixture(scope="session")
def cantor():
    return bi.cantor()


@pytest.fixture(scope="session")
def be():
    return bi.barnsley_elton()


@pytest.fixture(scope="session")
def planar():
    return bi.two_vertex_planar()


@pytest.fixture(scope="session")
def halving():
    return bi.deterministic_halving()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
