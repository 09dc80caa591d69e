import contextlib

import pytest

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion():
    """Context manager recording the outcome of one acceptance criterion."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        details: list[str] = []
        try:
            yield details
        except BaseException as exc:
            _CRITERIA[number] = (title, False, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            raise
        _CRITERIA[number] = (title, True, "; ".join(details))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        line = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
