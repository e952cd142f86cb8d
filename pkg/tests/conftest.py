import numpy as np
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_report():
    """Append ``(criterion, passed, detail)``; lines are printed in the terminal summary."""

    def report(criterion, passed, detail):
        status = {True: "PASS", False: "FAIL", None: "N/A "}[passed]
        ACCEPTANCE_LINES.append(f"[{status}] criterion {criterion}: {detail}")

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
