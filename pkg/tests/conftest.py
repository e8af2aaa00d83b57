import pytest

from minimaxdp.gridworld import GridConfig, build_gridworld
from minimaxdp.problem import desk1

import oracles

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def desk():
    return desk1()


@pytest.fixture(scope="session")
def small_family():
    """Fifty random small systems plus DESK-1."""
    return oracles.family(2024, 50) + [desk1()]


@pytest.fixture(scope="session")
def perfect_family():
    return oracles.family(7, 25, perfect=True)


@pytest.fixture(scope="session")
def action_only_family():
    return oracles.family(11, 25, action_only=True)


@pytest.fixture(scope="session")
def reduced_grid():
    return build_gridworld(GridConfig.reduced())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
