import functools

import pytest

from reducedfv import assemble, channel, hagen_poiseuille, offline

Y_IN = (0.2, 0.8, 0.0)


@functools.lru_cache(maxsize=None)
def default_problem(level, D=1e-2, v_in=1.0):
    """Grid, catalytic index, operator and basis for the default channel."""
    grid, cat = channel(level)
    op = assemble(grid, hagen_poiseuille(v_in), D, Y_IN)
    basis = offline(op, grid, cat)
    return grid, cat, op, basis


@pytest.fixture
def problem():
    return default_problem


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
