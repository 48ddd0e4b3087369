import numpy as np
import pytest

from swarmnn import _backend
from swarmnn.core import FlockState


@pytest.fixture(params=_backend.available_backends())
def each_backend(request):
    """Run a test once per available kernel backend."""
    with _backend.use_backend(request.param):
        yield request.param


def make_state(positions, velocities=None, leaders=None, step_index=0):
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    if velocities is None:
        velocities = np.zeros((n, 2))
    if leaders is None:
        leaders = np.zeros(n, dtype=bool)
    return FlockState(positions, np.asarray(velocities, dtype=np.float64),
                      np.asarray(leaders, dtype=bool), step_index)


def random_state(rng, n, spread=3.0, v_scale=1.0):
    return make_state(rng.uniform(-spread, spread, (n, 2)),
                      rng.normal(scale=v_scale, size=(n, 2)))
