import contextlib

import pytest

_CRITERIA = {}


class _Line:
    def __init__(self):
        self.detail = ""


@contextlib.contextmanager
def _criterion(number, title):
    """Record a pass/fail line for an acceptance criterion."""
    line = _Line()
    try:
        yield line
    except BaseException as exc:
        reason = line.detail or f"{type(exc).__name__}: {exc}".splitlines()[0]
        _CRITERIA[number] = f"criterion {number:2d} FAIL  {title}: {reason}"
        raise
    _CRITERIA[number] = f"criterion {number:2d} PASS  {title}: {line.detail}"


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
