import time

import pytest

from feedersim.engine import run
from feedersim.scenario import builtin_scenario_path, load_scenario


@pytest.fixture(scope="session")
def scenario_a():
    return load_scenario(builtin_scenario_path("scenario_A"))


@pytest.fixture(scope="session")
def scenario_b():
    return load_scenario(builtin_scenario_path("scenario_B"))


RUNTIMES: dict[str, float] = {}


def _timed_run(scenario):
    start = time.perf_counter()
    trace = run(scenario)
    RUNTIMES[scenario.name] = time.perf_counter() - start
    return trace


@pytest.fixture(scope="session")
def trace_a(scenario_a):
    return _timed_run(scenario_a)


@pytest.fixture(scope="session")
def trace_b(scenario_b):
    return _timed_run(scenario_b)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
