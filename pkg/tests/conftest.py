import pytest
from hypothesis import HealthCheck, settings

from gngs import DilationStructure, GridSpec, HomogeneousSymbol, two_term_problem

settings.register_profile("gngs", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("gngs")


@pytest.fixture(scope="session")
def line1():
    return DilationStructure((1,))


@pytest.fixture(scope="session")
def sym1(line1):
    return HomogeneousSymbol.rockland(line1)


@pytest.fixture(scope="session")
def aniso():
    return DilationStructure((1, 2))


@pytest.fixture(scope="session")
def sym2(aniso):
    return HomogeneousSymbol.rockland(aniso)


@pytest.fixture(scope="session")
def frac_coarse(sym1):
    """Fractional 1D problem on a small box."""
    return two_term_problem(sym1, "2/5", 0, 2, 3, GridSpec((128,), (20.0,)))


@pytest.fixture(scope="session")
def specs3(sym1, sym2):
    """Three problems used for the sampled functional checks."""
    return [
        two_term_problem(sym1, "2/5", 0, 2, 3, GridSpec((64,), (10.0,))),
        two_term_problem(sym2, 1, 0, 2, 4, GridSpec((32, 32), (6.0, 4.0))),
        two_term_problem(sym1, "1/4", "1/10", 3, 6, GridSpec((64,), (10.0,))),
    ]


# acceptance verdicts, echoed after the run so they survive output capture
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
