import os
import sys

import pytest

from svcorrect import kernels

sys.path.insert(0, os.path.dirname(__file__))

BACKENDS = sorted(kernels.backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available DTW kernel backend."""
    acc, back = kernels.backends()[request.param]
    monkeypatch.setattr(kernels, "accumulate", acc)
    monkeypatch.setattr(kernels, "backtrack", back)
    return request.param


_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome for the end-of-run summary."""

    def record(number, name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name} ({detail})"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
