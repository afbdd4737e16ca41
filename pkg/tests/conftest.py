import pytest

_LINES: list[str] = []


@pytest.fixture
def verdict_line():
    """Record one PASS/FAIL line for the end-of-run summary, then assert."""

    def emit(label: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        _LINES.append(line)
        print(line)
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].split(":")[0].lstrip("#"))):
            terminalreporter.write_line(line)
