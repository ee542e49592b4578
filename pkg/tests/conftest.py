import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tracelens.dtmc import build_dtmc
from tracelens.ingest import default_vocabulary

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def sample_text():
    return (DATA / "sample_log.json").read_text()


@pytest.fixture
def geometric():
    """State 0 escapes to absorbing goal 1 with probability 0.5 per step."""
    return build_dtmc([[0.5, 0.5], [0.0, 1.0]], 0, {"start": {0}, "goal": {1}})


@pytest.fixture
def split():
    """From 0, half the mass goes to absorbing goal 1, half to absorbing sink 2."""
    return build_dtmc([[0.0, 0.5, 0.5], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 0,
                      {"start": {0}, "goal": {1}, "sink": {2}})


@pytest.fixture
def swap():
    return build_dtmc([[0.0, 1.0], [1.0, 0.0]], 0, {"a": {0}, "b": {1}})


def pytest_terminal_summary(terminalreporter):
    import acceptance_log
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
