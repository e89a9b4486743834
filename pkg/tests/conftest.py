"""Shared fixtures: the shipped systems and potentials."""

from __future__ import annotations

from pathlib import Path

import pytest

import carpetdim as cd

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def full_square():
    return cd.load_system(DATA / "systems" / "full_square.json")


@pytest.fixture(scope="session")
def three_cell():
    return cd.load_system(DATA / "systems" / "three_cell.json")


@pytest.fixture(scope="session")
def uneven():
    return cd.load_system(DATA / "systems" / "uneven.json")


@pytest.fixture(scope="session")
def corner_indicator(full_square):
    return cd.load_potential(DATA / "potentials" / "corner_indicator.json",
                             full_square)


@pytest.fixture(scope="session")
def pair_weights(three_cell):
    return cd.load_potential(DATA / "potentials" / "pair_weights.json",
                             three_cell)
