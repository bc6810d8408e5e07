import time

import pytest

SUITE_LIMIT_S = 120.0

# Acceptance outcomes, filled in by tests/test_acceptance.py.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
_START = {}


def pytest_sessionstart(session):
    _START["t"] = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    total = _START.get("total", time.perf_counter() - _START["t"])
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        if k == 8:
            within = total < SUITE_LIMIT_S
            detail += f"; whole suite {total:.1f}s (limit {SUITE_LIMIT_S:.0f}s)"
            ok = ok and within
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")


@pytest.hookimpl(tryfirst=True)
def pytest_sessionfinish(session, exitstatus):
    _START["total"] = time.perf_counter() - _START["t"]
    if 8 in ACCEPTANCE and _START["total"] >= SUITE_LIMIT_S and session.exitstatus == 0:
        session.exitstatus = 1
