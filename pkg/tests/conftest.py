import numpy as np
import pytest
from hypothesis import settings

from lattice_semiconj.examples import BumpSpec, conjugated_action, standard_action
from lattice_semiconj.semiconj import solve_full

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

SMALL_RES = 48


@pytest.fixture(scope="session")
def sanov():
    return standard_action(2, "sl2_sanov")


@pytest.fixture(scope="session")
def eta2():
    return BumpSpec.default(2, 0.05)


@pytest.fixture(scope="session")
def oracle_small(sanov, eta2):
    return conjugated_action(sanov, eta2, SMALL_RES)


@pytest.fixture(scope="session")
def solved_small(oracle_small):
    return solve_full(oracle_small.spec, res=SMALL_RES)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.format_results():
            terminalreporter.write_line(line)
