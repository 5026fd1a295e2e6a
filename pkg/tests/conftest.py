import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "unicorn", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("unicorn")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# verdict lines from tests/test_acceptance.py, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
