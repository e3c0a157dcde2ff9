"""Shared fixtures for the test suite.

Every test that needs randomness takes the seeded ``rng`` fixture (or
constructs its own generator from an explicit seed) so the suite is
deterministic run to run.
"""

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
