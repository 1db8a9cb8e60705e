import pytest

from bhadv.core import LabeledPValues, TestLabel

ACCEPTANCE_LINES = []


@pytest.fixture
def five():
    """Five tests, q = 0.5: bins of width 0.1, two alternatives at the bottom."""
    A, N = TestLabel.ALTERNATIVE, TestLabel.NULL
    return LabeledPValues.from_entries(
        [(1, 0.05, A), (2, 0.2, A), (3, 0.35, N), (4, 0.77, N), (5, 0.9, N)]
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
