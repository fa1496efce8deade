"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from sediff.schedule import Schedule


@pytest.fixture
def s() -> Schedule:
    return Schedule()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def spectra_pair(rng):
    """A small random (clean, noisy) compressed-spectrum pair."""
    shape = (6, 8)
    clean = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return clean, clean + 0.5 * noise
