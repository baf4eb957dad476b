"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The lines are collected and repeated in the pytest terminal summary; the
same checks back the ``conilay Verify`` experiment.
"""

import pytest

from conilay import verify

LINES: list[str] = []

CHECKS = {number: check for number, check in enumerate(verify.ALL_CHECKS, start=1)}


@pytest.mark.parametrize("number", sorted(CHECKS), ids=[f"criterion_{n}_{CHECKS[n].__name__[6:]}" for n in sorted(CHECKS)])
def test_criterion(number):
    res = CHECKS[number]()
    print()
    print(res.line())
    LINES.append(res.line())
    assert res.number == number
    assert res.passed, res.line()
