"""Shared fixtures for the test suite."""

import numpy as np
import pytest


@pytest.fixture
def rng():
    """Fresh deterministic generator; tests that need several streams spawn
    their own from explicit seeds."""
    return np.random.default_rng(20260814)
