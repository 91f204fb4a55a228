import pytest

_LINES: list[tuple[int, str]] = []


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path_factory, monkeypatch):
    monkeypatch.setenv("CSAGA_CACHE_DIR", str(tmp_path_factory.getbasetemp() / "refcache"))


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def emit(num: int, title: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {num:>2}  {title}: {detail}"
        _LINES.append((num, line))
        print(line)
        return passed
    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES):
            terminalreporter.write_line(line)
