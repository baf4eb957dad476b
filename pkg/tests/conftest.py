import math

import mpmath as mp
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def mp_j0_series(x, dps=50):
    """Ascending series of J0 in high precision."""
    with mp.workdps(dps):
        x = mp.mpf(x)
        q = -(x * x) / 4
        term = total = mp.mpf(1)
        k = 0
        while abs(term) > mp.mpf(10) ** (-dps + 5) * max(1, abs(total)):
            k += 1
            term *= q / (k * k)
            total += term
        return total


def mp_bisect(f, a, b, iters=200):
    a, b = mp.mpf(a), mp.mpf(b)
    fa = f(a)
    for _ in range(iters):
        m = (a + b) / 2
        fm = f(m)
        if fa * fm <= 0:
            b = m
        else:
            a, fa = m, fm
    return float((a + b) / 2)


@pytest.fixture(scope="session")
def deg():
    return math.radians


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
