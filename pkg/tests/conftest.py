"""
Shared fixtures: modular-symbol spaces, small families and grids
"""
import pytest

from src.core.grid import EvalGrid
from src.core.numkernel import primes_up_to
from src.models.hecke import compute_family
from src.models.modular_symbols import build_space


@pytest.fixture(scope="session")
def table():
    return primes_up_to(1 << 16)


@pytest.fixture(scope="session")
def space11():
    return build_space(11)


@pytest.fixture(scope="session")
def space23():
    return build_space(23)


@pytest.fixture(scope="session")
def space37():
    return build_space(37)


@pytest.fixture(scope="session")
def family11():
    return compute_family(11, 1 << 14)


@pytest.fixture(scope="session")
def family23():
    return compute_family(23, 4096)


@pytest.fixture(scope="session")
def family37():
    return compute_family(37, 4096)


@pytest.fixture(scope="session")
def family101():
    return compute_family(101, 1 << 15)


@pytest.fixture
def small_grid():
    return EvalGrid.disc(0.75, 0.1, 32)


@pytest.fixture
def default_grid():
    return EvalGrid.disc(0.75, 0.2, 64)
