import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines are echoed in the terminal summary, since pytest captures
# stdout of passing tests
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    def report(line: str) -> None:
        print(line)
        ACCEPTANCE_LINES.append(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
