"""Shared fixtures; collects the acceptance verdict lines for the terminal summary."""

from __future__ import annotations

import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config) -> None:
    config.stash[_KEY] = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict(tag, ok, detail)``."""
    lines = request.config.stash[_KEY]

    def record(tag: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    lines = config.stash.get(_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
