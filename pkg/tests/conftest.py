"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from ecdans.datagen import ScmSpec, random_window_graph, simulate
from ecdans.model import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def iid_dataset(rng):
    """Four mutually independent white-noise columns."""
    return Dataset.from_values(rng.standard_normal((600, 4)))


@pytest.fixture
def small_truth():
    """A stationary lagged-only ground truth at m=4, tau_max=2."""
    spec = ScmSpec(m=4, tau_max=2, seed=3, p_contemp=0.0)
    return random_window_graph(spec), spec


@pytest.fixture
def simulated(small_truth):
    graph, spec = small_truth
    return graph, spec, simulate(graph, spec)
