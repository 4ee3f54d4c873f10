from __future__ import annotations

import pytest

_VERDICTS: list[str] = []


class Verdict:
    """Records the single PASS/FAIL line of one acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.line: str | None = None

    def record(self, ok: bool, detail: str) -> bool:
        self.line = f"[{'PASS' if ok else 'FAIL'}] criterion {self.number:>2} {self.title}: {detail}"
        print(self.line)
        _VERDICTS.append(self.line)
        return ok


@pytest.fixture
def verdict(request):
    marker = request.node.get_closest_marker("criterion")
    v = Verdict(*marker.args)
    yield v
    if v.line is None:
        v.record(False, "did not complete (see traceback)")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
