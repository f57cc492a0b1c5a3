"""
Shared pytest fixtures for hbl tests.
"""
import copy
import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

from config import DEFAULT_CONFIG
from space import FiniteSpace, gen_grid, gen_hyperbolic_disk, gen_path, gen_tree


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def sample_config() -> dict:
    """Small, fast configuration on a depth-3 tree."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    config.update({
        "space": {"generator": "tree", "params": {"q": 3, "depth": 3}},
        "samples": 20,
        "functions": 3,
        "scales": {"b": 5.5, "c": 4.5, "b0": None, "q": 2.0, "r": "inf"},
        "amp": {"R0": 1.0, "beta": 0.75},
        "geometry": {"taus": [2.0, 4.0], "bs": [1.0, 2.0], "kappas": [1.0, 2.0]},
        "operators": {"b": 2.0, "multipliers": [{"kind": "heat", "t": 0.5}]},
    })
    return config


@pytest.fixture
def two_points() -> FiniteSpace:
    """K2: two unit-weight points at distance 1."""
    return gen_path(2)


@pytest.fixture
def single_point() -> FiniteSpace:
    return FiniteSpace(("a",), np.zeros((1, 1)), np.ones(1), name="point")


@pytest.fixture
def path3() -> FiniteSpace:
    return gen_path(3)


@pytest.fixture
def path8() -> FiniteSpace:
    return gen_path(8)


@pytest.fixture
def path9() -> FiniteSpace:
    return gen_path(9)


@pytest.fixture
def tree33() -> FiniteSpace:
    """Homogeneous tree of degree 3 truncated at depth 3 (22 points)."""
    return gen_tree(3, 3)


@pytest.fixture
def tree34() -> FiniteSpace:
    return gen_tree(3, 4)


@pytest.fixture
def grid4() -> FiniteSpace:
    return gen_grid(2, 4)


@pytest.fixture
def hyperbolic_small() -> FiniteSpace:
    return gen_hyperbolic_disk(40, 2.0, seed=3)


@pytest.fixture
def weighted_triangle() -> FiniteSpace:
    """Three points with a non-graph metric and uneven weights."""
    dist = np.array([[0.0, 1.0, 1.5], [1.0, 0.0, 1.0], [1.5, 1.0, 0.0]])
    return FiniteSpace(("x", "y", "z"), dist, np.array([1.0, 2.0, 0.5]), name="triangle")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
