from __future__ import annotations

import pytest

from qconsensus.engine import run
from qconsensus.golden import example1_config, example2_config


@pytest.fixture(scope="session")
def trace1():
    return run(example1_config())


@pytest.fixture(scope="session")
def trace2():
    return run(example2_config(termination="round-cap", max_rounds=24))


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
