import numpy as np
import pytest

from mshom import _accel, registry


@pytest.fixture
def restore_accel():
    """Snapshot the kernel backend flag and put it back after the test."""
    before = _accel.enabled()
    yield
    _accel.set_enabled(before)


@pytest.fixture(scope="session")
def cases():
    return registry()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
