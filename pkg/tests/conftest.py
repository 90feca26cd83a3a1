import numpy as np
import pytest

from rmsgof.models import contingency2x2, poisson, zipf

# criterion lines recorded by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []

REFERENCE_CASES = [
    ("contingency2x2", 0.03),
    ("zipf", 1.0),
    ("poisson", 10.3),
]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def models():
    return {"contingency2x2": contingency2x2(), "zipf": zipf(100), "poisson": poisson()}
