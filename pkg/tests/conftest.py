import numpy as np
import pytest

from potwell.grid import Grid, Params
from potwell.wells import OptimizerSettings, compute_wells


@pytest.fixture(scope="session")
def grid256():
    return Grid.interval(256)


@pytest.fixture(scope="session")
def p2q3():
    return Params(2.0, 3.0)


@pytest.fixture(scope="session")
def p15q3():
    return Params(1.5, 3.0)


@pytest.fixture(scope="session")
def opt():
    return OptimizerSettings(starts=4, seed=0)


@pytest.fixture(scope="session")
def wells_p2(grid256, p2q3, opt):
    return compute_wells(grid256, p2q3, opt)


@pytest.fixture
def cos1(grid256):
    return np.cos(np.pi * grid256.coords[0])


ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
