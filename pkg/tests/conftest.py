import pytest

from nlswave.nonlinearity import CombinedPower
from nlswave.profile import build_profile

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cubic():
    return CombinedPower.cubic()


@pytest.fixture(scope="session")
def combined():
    """G(s) = -s^3 + s^5: focusing at small amplitude, defocusing at large."""
    return CombinedPower(a=1.0, b=1.0, p=3.0, q=5.0)


@pytest.fixture(scope="session")
def critical():
    return CombinedPower(a=1.0 / 6.0, p=6.0)


@pytest.fixture(scope="session")
def cubic_profile_4096(cubic):
    return build_profile(cubic, 1.0, X=20.0, n=4096)
