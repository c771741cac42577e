"""Shared densities and grids."""

import pytest

from mixdense.analysis import QuadratureGrid
from mixdense.classes import (
    cauchy_density,
    counterexample_density,
    laplace_density,
    normal_density,
    triangular_density,
    uniform_density,
)


@pytest.fixture
def normal():
    return normal_density()


@pytest.fixture
def laplace():
    return laplace_density()


@pytest.fixture
def cauchy():
    return cauchy_density()


@pytest.fixture
def triangular():
    return triangular_density()


@pytest.fixture
def uniform():
    return uniform_density()


@pytest.fixture
def counterexample():
    return counterexample_density()


@pytest.fixture
def grid8():
    return QuadratureGrid.cube(8.0, 1024)


@pytest.fixture
def grid4():
    return QuadratureGrid.cube(4.0, 1024)


@pytest.fixture
def results_dir(tmp_path, monkeypatch):
    """Redirect relative run outputs into a temporary directory."""
    import mixdense.harness as harness

    monkeypatch.setattr(harness, "RESULTS_DIR", tmp_path)
    return tmp_path
