import pytest

_LINES = []


@pytest.fixture
def criterion():
    """``report(key, ok, detail)`` prints and records one PASS/FAIL line."""
    def report(key, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}"
        _LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
