import pytest

ACCEPTANCE: dict = {}


def _recorder(n: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {title} | {detail}"


@pytest.fixture
def acceptance():
    return _recorder


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
