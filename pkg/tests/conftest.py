import pytest

_VERDICTS = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion; fails the test on a miss."""

    def check(number, ok, detail):
        _VERDICTS[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        ok, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
