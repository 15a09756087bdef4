import numpy as np
import pytest

from belpm.kernels import Kernel
from belpm.network import BelpmModel, compute_expected_punishments
from belpm.series import EmbeddedDataset


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def small_dataset(rng):
    """12 random samples in 3 dimensions with smooth targets."""
    inputs = rng.normal(size=(12, 3))
    targets = np.sin(inputs.sum(axis=1)) + 0.1 * rng.normal(size=12)
    return EmbeddedDataset(inputs=inputs, targets=targets, dim=3, lag=1, horizon=1)


@pytest.fixture
def exp_kernel():
    return Kernel("exponential")


@pytest.fixture
def small_model(small_dataset, exp_kernel):
    """Untrained model over the small dataset, punishments populated."""
    model = BelpmModel.initialize(small_dataset, k_a=3, k_o=5, kernel=exp_kernel,
                                  b_a=np.array([0.8, 1.0, 1.2]),
                                  b_o=np.array([0.5, 0.7, 0.9, 1.1, 1.3]))
    compute_expected_punishments(model)
    return model


def random_model(rng, n=10, dim=3, k_a=3, k_o=4, kernel=None):
    """Small random model with random weights; used by oracle sweeps."""
    kernel = kernel or Kernel("exponential")
    inputs = rng.normal(size=(n, dim))
    targets = rng.normal(size=n)
    ds = EmbeddedDataset(inputs=inputs, targets=targets, dim=dim, lag=1, horizon=1)
    model = BelpmModel.initialize(ds, k_a=k_a, k_o=k_o, kernel=kernel,
                                  b_a=rng.uniform(0.2, 1.5, size=k_a),
                                  b_o=rng.uniform(0.2, 1.5, size=k_o))
    model.w = rng.normal(size=3)
    model.w_a = rng.normal(size=3)
    model.w_o = rng.normal(size=2)
    compute_expected_punishments(model)
    return model
