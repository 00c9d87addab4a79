import os

import pytest
from hypothesis import HealthCheck, settings

from carnot import load_algebra

settings.register_profile("carnot", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "carnot"))


@pytest.fixture(scope="session")
def h3():
    return load_algebra("h3")


@pytest.fixture(scope="session")
def h5():
    return load_algebra("h5")


@pytest.fixture(scope="session")
def engel():
    return load_algebra("engel")


@pytest.fixture(scope="session")
def h3f():
    return load_algebra("h3", "floating")


@pytest.fixture(scope="session")
def engelf():
    return load_algebra("engel", "floating")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and print it immediately."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
