from __future__ import annotations

import os

import numpy as np
import pytest

from zetaforge import symbolic as sy
from zetaforge import transfer as tr
from zetaforge.representation import Representation, trivial

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


def random_twist(symbols, dim=2, seed=7, scale=0.3) -> Representation:
    """Non-unitary rep near the identity with complex entries."""
    rng = np.random.default_rng(seed)
    return Representation(dim, {s: np.eye(dim) + scale * (rng.standard_normal((dim, dim))
                                                           + 1j * rng.standard_normal((dim, dim)))
                                for s in symbols})


def jordan_twist() -> Representation:
    """Two-dimensional twist of the cusped model with chi(p) a unipotent Jordan block."""
    return Representation(2, {"h": np.diag([1.5, 1 / 1.5]), "p": np.array([[1, 1], [0, 1]])})


@pytest.fixture(scope="session")
def funnel_model():
    return sy.funnel()


@pytest.fixture(scope="session")
def funnel_tuple(funnel_model):
    return tr.tuple_from_group(funnel_model)


@pytest.fixture(scope="session")
def schottky():
    return sy.schottky_rank2()


@pytest.fixture(scope="session")
def schottky_tuple(schottky):
    return tr.tuple_from_group(schottky)


@pytest.fixture(scope="session")
def cusped():
    return sy.cusped_example()


@pytest.fixture(scope="session")
def cusped_tuple(cusped):
    return tr.tuple_from_group(cusped)


@pytest.fixture(scope="session")
def twist(schottky):
    return random_twist(schottky.symbols)


@pytest.fixture(scope="session")
def trivial_schottky(schottky):
    return trivial(schottky.symbols)
