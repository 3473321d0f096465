import time

import numpy as np
import pytest

from heavytail import ExponentialShift, LatticePolyTail, LognormalShift, ParetoShift, WeibullShift


@pytest.fixture
def pareto():
    return ParetoShift(2.5, 1.0, 3.0)


@pytest.fixture
def lattice():
    return LatticePolyTail(0.7, 3.0)


def all_models():
    return [
        ParetoShift(2.5, 1.0, 3.0),
        WeibullShift(0.5, 1.0, 3.0),
        LognormalShift(0.0, 1.0, 3.0),
        ExponentialShift(1.0, 2.0),
        LatticePolyTail(0.7, 3.0),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance verdicts, printed after the run so they show without -s
ACCEPTANCE_LINES = []
_SESSION = {}
SUITE_BUDGET_SECONDS = 45 * 60


def pytest_sessionstart(session):
    _SESSION["start"] = time.perf_counter()


def session_elapsed():
    return time.perf_counter() - _SESSION.get("start", time.perf_counter())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES and "start" not in _SESSION:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        tr.write_line(line)
    total = session_elapsed()
    ok = total < SUITE_BUDGET_SECONDS
    tr.write_line(f"{'PASS' if ok else 'FAIL'} suite wall clock {total:.0f}s (budget {SUITE_BUDGET_SECONDS}s)")
