import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from basic_hitchin.deformation import assemble
from basic_hitchin.geometry import (
    GeometryConfig,
    L_SHAPE_GLUING,
    TORUS_GLUING,
    build_surface,
    grid_config,
)
from basic_hitchin.hitchin import SolveConfig, find_irreducible


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def torus():
    return build_surface(GeometryConfig("spectral", 1, 8, 1.0))


@pytest.fixture(scope="session")
def small_torus():
    return build_surface(GeometryConfig("spectral", 1, 4, 2.0))


@pytest.fixture(scope="session")
def grid_torus():
    return build_surface(grid_config(TORUS_GLUING, 4, 1))


@pytest.fixture(scope="session")
def genus2():
    return build_surface(grid_config(L_SHAPE_GLUING, 4, 2))


@pytest.fixture(scope="session")
def torus_solution(torus):
    pair, rep, _ = find_irreducible(torus, SolveConfig(rank=1, seed=0, residual_tolerance=1e-12))
    assert rep.converged
    return pair, rep


@pytest.fixture(scope="session")
def torus_complex(torus_solution):
    return assemble(torus_solution[0])


@pytest.fixture(scope="session")
def genus2_rank1(genus2):
    pair, rep, _ = find_irreducible(genus2, SolveConfig(rank=1, seed=0, residual_tolerance=1e-12))
    assert rep.converged
    return pair, rep


@pytest.fixture(scope="session")
def genus2_rank2(genus2):
    """Irreducible rank-2 solution on the genus-2 surface (seed 3 is the
    first seed whose perturbed direct sum converges to an irreducible pair)."""
    pair, rep, _ = find_irreducible(genus2, SolveConfig(rank=2, seed=3, residual_tolerance=1e-12))
    assert rep.converged and rep.verdict == "irreducible"
    return pair, rep


@pytest.fixture(scope="session")
def genus2_rank2_complex(genus2_rank2):
    return assemble(genus2_rank2[0])


# acceptance lines are collected here and echoed in the terminal summary, so
# they appear in the log even when output capture is on
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
