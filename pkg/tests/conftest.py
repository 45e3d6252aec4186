import pytest

_CRITERIA: list = []


@pytest.fixture
def criterion():
    """Record one acceptance line; returns ``ok`` so the test can assert on it."""

    def record(cid: str, ok: bool, detail: str) -> bool:
        line = f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in _CRITERIA:
        terminalreporter.write_line(line)
