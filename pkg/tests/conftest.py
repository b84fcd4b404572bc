import pytest

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record():
    """Store one summary line per acceptance criterion."""

    def _record(number: int, title: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
