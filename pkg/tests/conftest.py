import numpy as np
import pytest

from pmdrom import SnapshotMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


def random_snapshots(rng, n_rows=12, n_samples=8, n_time=1):
    """Well-spread random snapshot matrix for structural tests."""
    n_spatial = n_rows // n_time
    data = rng.normal(size=(n_spatial * n_time, n_samples))
    params = np.sort(rng.uniform(0.0, 1.0, n_samples))
    while np.any(np.diff(params) <= 1e-6):
        params = np.sort(rng.uniform(0.0, 1.0, n_samples))
    return SnapshotMatrix(data=data, params=params, n_spatial=n_spatial, n_time=n_time)
