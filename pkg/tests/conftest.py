import numpy as np
import pytest

from lagrangian_ssr.config import load_scenario
from lagrangian_ssr.smallsignal import linearize, modal

ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    """Store one acceptance line; printed in the terminal summary."""
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def fbm():
    return load_scenario("fbm")


@pytest.fixture(scope="session")
def stable():
    return load_scenario("stable_smib")


@pytest.fixture(scope="session")
def fbm_modes(fbm):
    return modal(linearize(fbm.model, fbm.equilibrium))


@pytest.fixture(scope="session")
def stable_modes(stable):
    return modal(linearize(stable.model, stable.equilibrium))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
