import numpy as np
import pytest

from gradflow import tvflow, wflow1d

ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fp_spec():
    return wflow1d.preset("fokker-planck")


@pytest.fixture(scope="session")
def fp_equilibrium(fp_spec):
    return wflow1d.equilibrium_solve(fp_spec, 2048).X


@pytest.fixture(scope="session")
def fp_trajectory(fp_spec, fp_equilibrium):
    X0 = wflow1d.gaussian(2.0, 1.0, 2048)
    return wflow1d.run_wflow(fp_spec, X0, 2.0, 0.01, 3.0, nu=fp_equilibrium)


@pytest.fixture(scope="session")
def disc_run():
    v0 = tvflow.disc(128, 0.25, height=1.0, bc="dirichlet")
    inst = tvflow.make_instance(v0)
    return inst, tvflow.run_tv_flow(inst, 2.5e-4, 0.15)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
