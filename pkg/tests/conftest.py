import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from projboost import data

# The suite shares one core with the solvers under test; wall-clock
# deadlines would only add flakiness.
settings.register_profile("suite", deadline=None,
                          suppress_health_check=list(HealthCheck))
settings.load_profile("suite")


def subset_classes(ds, k):
    """First k classes of a toy dataset, relabeled onto 1..k."""
    keep = np.flatnonzero(ds.labels <= k)
    return data.Dataset(ds.features[keep], ds.labels[keep], k,
                        tuple(range(1, k + 1)))


@pytest.fixture
def toy():
    return data.gen_diagonal_gaussians(30, seed=11)
