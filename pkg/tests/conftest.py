import pytest

import helpers
from helpers import scenario
from transobs.geometry import SpatialDomain


@pytest.fixture(scope="session")
def S1():
    return scenario("S1")


@pytest.fixture(scope="session")
def S2():
    return scenario("S2")


@pytest.fixture(scope="session")
def S3():
    return scenario("S3")


@pytest.fixture(scope="session")
def static():
    return scenario("static")


@pytest.fixture
def interval():
    return SpatialDomain.interval(-1.0, 1.0)


@pytest.fixture
def disc():
    return SpatialDomain.ball((0.0, 0.0), 1.0)


def pytest_terminal_summary(terminalreporter):
    if helpers.ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in helpers.ACCEPTANCE:
            terminalreporter.write_line(line)
