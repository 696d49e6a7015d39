import pytest

from adaptsp.model import SolverConfig
from adaptsp.tree import illustrative_tree

_LINES: list[str] = []


class Recorder:
    """Collects one PASS/FAIL line per acceptance check and prints it immediately."""

    def __call__(self, label: str, ok: bool, detail: str = "") -> bool:
        line = f"{label}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
        _LINES.append(line)
        print(line)
        return ok


@pytest.fixture
def record():
    return Recorder()


@pytest.fixture(scope="session")
def exact():
    return SolverConfig(gap=1e-9)


@pytest.fixture(scope="session")
def app_tree():
    return illustrative_tree()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
