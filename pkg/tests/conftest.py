import numpy as np
import pytest

from pqwave.filters import builtin_pair, design_paper_pair


@pytest.fixture(scope="session")
def paper_pair():
    return builtin_pair("paper")


@pytest.fixture(scope="session")
def db40():
    return builtin_pair("db40")


@pytest.fixture(scope="session")
def db45():
    return builtin_pair("db45")


@pytest.fixture(scope="session")
def designed_pair():
    """The full design chain run from scratch (a few seconds)."""
    return design_paper_pair(99, 0.47)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
