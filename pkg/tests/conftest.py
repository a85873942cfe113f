import pytest

_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record a named acceptance criterion; summarized after the run."""

    def check(name: str, ok: bool, detail: str = "") -> None:
        _CRITERIA[name] = (bool(ok), detail)
        assert ok, f"{name}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        ok, detail = _CRITERIA[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
