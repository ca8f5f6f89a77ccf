import numpy as np
import pytest

from sparsemp import synth_demoset


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def small_fixture():
    """3 demos, 3 DoF, 120 samples, 4 planted features, noise-free."""
    demos, truth = synth_demoset(
        n_demos=3, n_dof=3, n_samples=120, dt=1.0 / 120, k_features=4,
        noise=0.0, seed=3,
    )
    return demos, truth


@pytest.fixture(scope="session")
def noisy_fixture():
    demos, truth = synth_demoset(
        n_demos=3, n_dof=3, n_samples=120, dt=1.0 / 120, k_features=4,
        noise=0.01, seed=3,
    )
    return demos, truth
