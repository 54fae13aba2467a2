import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "robustlab",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("robustlab")


@pytest.fixture
def gen():
    return np.random.default_rng(20240601)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line and assert it."""

    def record(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
