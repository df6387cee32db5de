from __future__ import annotations

import numpy as np
import pytest

from ievm import backends


@pytest.fixture(params=backends.available_backends())
def backend(request):
    """Run the test once per available kernel backend."""
    previous = backends.active_backend()
    backends.set_backend(request.param)
    yield request.param
    backends.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
