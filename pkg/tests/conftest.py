import time

import pytest

from alspg.harness import bundled_dir, run_suite

# (criterion number, verdict line) collected by the acceptance tests
ACCEPTANCE_LINES: list[tuple[int, str]] = []


@pytest.fixture(scope="session")
def bundled_suite():
    """Every bundled scenario run once, serially; returns (records, summary rows, seconds)."""
    t0 = time.perf_counter()
    records, rows = run_suite(bundled_dir())
    return records, rows, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_report():
    """Record one PASS/FAIL line per criterion; echoed in the terminal summary."""

    def report(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return report
