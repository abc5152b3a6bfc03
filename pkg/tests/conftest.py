from __future__ import annotations

import pytest

from pinlat import cubic, kernel_vector, assemble
from pinlat.profile import continue_to_fold, extreme_fold


@pytest.fixture(scope="session")
def f():
    return cubic()


@pytest.fixture(scope="session")
def upper_fold(f):
    return extreme_fold(f, "upper", N=200)


@pytest.fixture(scope="session")
def lower_fold(f):
    return extreme_fold(f, "lower", N=200)


@pytest.fixture(scope="session")
def fold_kernel(f, upper_fold):
    return kernel_vector(assemble(upper_fold.profile_at_fold, f))


@pytest.fixture(scope="session")
def upper_fold_400(f):
    return continue_to_fold(f, 0.0, "upper", N=400)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def _report(number: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
