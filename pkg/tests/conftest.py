import numpy as np
import pytest

from yeebands.oracle import covering_lattices

# One line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_lattices():
    """Randomised admissible lattices covering every J3 category and both
    signs of each in-plane shear, at two grid sizes."""
    rng = np.random.default_rng(7)
    out = []
    for shape in ((4, 3, 2), (5, 4, 3)):
        out.extend(covering_lattices(rng, shape, count=16))
    return out
