import pytest

from hbgfdi import pipeline
from hbgfdi.bondgraph import builtin_three_tank
from hbgfdi.fsm import standard_modes

PARAMS = ["R1", "C1", "R12", "C2", "R23", "C3", "R2"]


@pytest.fixture(scope="session")
def bg():
    return builtin_three_tank()


@pytest.fixture(scope="session")
def analysis(bg):
    return pipeline.analyze(bg)


@pytest.fixture(scope="session")
def qual(bg):
    return pipeline.qualitative_model(bg)


@pytest.fixture(scope="session")
def modes(bg):
    return standard_modes(bg.mode_names)


@pytest.fixture(scope="session")
def default_run(analysis):
    return pipeline.run_quant(analysis, pipeline.scenario())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
