import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from arranger.core import ClientKey, KeyDirectory  # noqa: E402


@pytest.fixture(scope="session")
def keys():
    return [ClientKey.from_seed(bytes([i]) * 32) for i in range(4)]


@pytest.fixture(scope="session")
def pki(keys):
    return KeyDirectory(k.sender for k in keys)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one criterion outcome; the lines are echoed in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(criterion: str, ok: bool, detail: str) -> bool:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split(":")[0]):
            terminalreporter.write_line(line)
