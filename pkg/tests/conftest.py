import numpy as np
import pytest

from madelung_thermo import Params, compute_state, integrate_radial
from madelung_thermo.solver import RadialSolution

_ACCEPTANCE = []


def record_criterion(label: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  criterion {label}: {detail}"
    _ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


def flat_solution(T=1.0, X=1.0, a=1.0, n=65):
    """Synthetic profile U == X on a disk of radius ``a``."""
    r = np.linspace(0.0, a, n)
    return RadialSolution.from_arrays(Params(T, X), r, np.full(n, X), np.zeros(n))


@pytest.fixture(scope="session")
def sol11():
    return integrate_radial(Params(1.0, 1.0))


@pytest.fixture(scope="session")
def state11(sol11):
    return compute_state(sol11)


@pytest.fixture(scope="session")
def grid_solutions():
    """Solutions on the acceptance grid T x X."""
    out = {}
    for T in (0.1, 0.5, 1.0, 2.0, 5.0):
        for X in (0.5, 1.0, 2.0):
            out[(T, X)] = integrate_radial(Params(T, X))
    return out


@pytest.fixture(scope="session")
def grid_states(grid_solutions):
    return {k: compute_state(s) for k, s in grid_solutions.items()}
