import numpy as np
import pytest
from hypothesis import settings

from boussinesq_nonlocal.grid import make_grid
from boussinesq_nonlocal.symbols import preset_symbol

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def grid1():
    return make_grid(1, 32, np.pi)


@pytest.fixture
def wide_grid():
    return make_grid(1, 64, 8.0)


@pytest.fixture
def classical1():
    return preset_symbol("classical_boussinesq_1")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
