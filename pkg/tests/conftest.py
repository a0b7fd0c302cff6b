import numpy as np
import pytest

from kppstab.modes import ModeContext, default_context


@pytest.fixture(scope="session")
def ctx():
    return default_context()


@pytest.fixture(scope="session")
def heat():
    return ModeContext.pure_heat_model()


@pytest.fixture(scope="session")
def model(ctx):
    return ctx.model


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])
