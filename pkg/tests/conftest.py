import numpy as np
import pytest

from pcondenser import GridSpec, build_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def interval_condenser(p, h, r=1.0, s=3.0, half_width=4.0):
    """Grid on [-half_width, half_width] with E = [-r, r] and Omega = (-s, s)."""
    g = build_grid(GridSpec.interval(-half_width, half_width, h, p))
    x = g.positions[:, 0]
    E = np.flatnonzero(np.abs(x) <= r + 1e-12)
    omega = np.flatnonzero(np.abs(x) < s - 1e-12)
    return g, E, omega


ACCEPTANCE = {}


def record_acceptance(number, ok, detail):
    """Store and print one PASS/FAIL line for an acceptance criterion."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
