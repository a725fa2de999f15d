import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

TESTS = os.path.dirname(os.path.abspath(__file__))
GOLDEN = os.path.join(TESTS, "golden")
FIXTURES = os.path.join(TESTS, "..", "src", "spinmarket", "fixtures")


@pytest.fixture(scope="session")
def golden_dir():
    return GOLDEN


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


ACCEPTANCE_LINES = pytest.StashKey[list]()
SESSION_START = pytest.StashKey[float]()


def pytest_sessionstart(session):
    import time

    session.config.stash[SESSION_START] = time.perf_counter()


@pytest.fixture
def acceptance_log(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} C{number:02d} {title}: {detail}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    import time

    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
    elapsed = time.perf_counter() - config.stash[SESSION_START]
    if any(line[5:8] == "C12" for line in lines):
        verdict = "PASS" if elapsed < 120 else "FAIL"
        terminalreporter.write_line(f"{verdict} C12 session wall time: {elapsed:.1f} s (limit 120 s)")
    else:
        terminalreporter.write_line(f"session wall time: {elapsed:.1f} s")
