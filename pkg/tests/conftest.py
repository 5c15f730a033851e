import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; printed at the end of the session."""
    def record(number, ok, detail, soft=False):
        status = "PASS" if ok else ("FLAG" if soft else "FAIL")
        _LINES.append((number, f"[{status}] criterion {number}: {detail}"))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
