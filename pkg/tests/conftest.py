"""Shared test plumbing.

The acceptance tests record one outcome line per criterion; the
terminal-summary hook prints them all at the end of the run so the
pass/fail ledger is visible regardless of capture settings.
"""

from __future__ import annotations

import numpy as np
import pytest

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}
ACCEPTANCE_TOTAL = 12


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in range(1, ACCEPTANCE_TOTAL + 1):
        if number in ACCEPTANCE_RESULTS:
            passed, detail = ACCEPTANCE_RESULTS[number]
            status = "PASS" if passed else "FAIL"
        else:
            status, detail = "NOT RUN", ""
        line = f"criterion {number:2d}: {status}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
