import sys
from pathlib import Path

import pytest
from hypothesis import settings

from roughsmile.volmodel import RBergomiParams

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# parameter sets of the three figures used throughout
FIG1 = RBergomiParams(sigma0=0.2, eta=1.5, rho=-0.7, H=0.3, theta=1.0)
FIG2 = RBergomiParams(sigma0=0.15, eta=1.8, rho=-0.78, H=0.07, theta=1.0)
FIG4 = RBergomiParams(sigma0=0.2557, eta=0.2928, rho=-0.7571, H=0.1, theta=0.0)


@pytest.fixture
def fig1():
    return FIG1


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
