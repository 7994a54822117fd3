import numpy as np
import pytest

from hartree_lab.lattice import build_grid
from hartree_lab.meanfield import Orbital


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_orbital(grid, rng):
    values = rng.normal(size=grid.points) + 1j * rng.normal(size=grid.points)
    return Orbital.from_values(grid, values, normalize=True)


def orthogonal_orbital(phi, rng):
    h = phi.grid.spacing
    other = random_orbital(phi.grid, rng).values
    other = other - h * np.vdot(phi.values, other) * phi.values
    return Orbital.from_values(phi.grid, other, normalize=True)


def even_field(grid, rng, real=True):
    """Random profile with v(x) = v(-x) on the periodic grid."""
    M = grid.points
    raw = rng.normal(size=M)
    return 0.5 * (raw + np.roll(raw[::-1], 1))


@pytest.fixture
def grid8():
    return build_grid(2 * np.pi, 8)


# one line per acceptance criterion, printed after the test summary
ACCEPTANCE_RESULTS = {}


def record_acceptance(number: int, title: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS[number] = (title, passed, detail)
    print(f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {title} {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"[{number}] {'PASS' if passed else 'FAIL'} {title} {detail}".rstrip())
