"""Shared fixtures: tower files under tests/fixtures and generated towers."""

import os
import random

import pytest

from harmonic import random_generic_tower
from ngonal import is_good
from towerio import read_tower

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")

GOOD_TOWER_COUNT = 50


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


@pytest.fixture
def load_tower():
    """Return a loader: load_tower('ex1') parses tests/fixtures/ex1.twr."""
    def load(name):
        return read_tower(fixture_path(f"{name}.twr")).tower
    return load


@pytest.fixture(scope="session")
def good_towers():
    """Generated towers over trees with up to six edges, connected top and connected outputs."""
    towers = []
    for seed in range(400):
        t = random_generic_tower(random.Random(seed), max_edges=6)
        if is_good(t):
            towers.append(t)
            if len(towers) == GOOD_TOWER_COUNT:
                break
    assert len(towers) == GOOD_TOWER_COUNT
    return towers
