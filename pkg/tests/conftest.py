import numpy as np
import pytest

from rclab.reservoir import ReservoirConfig, build_reservoir
from rclab.signal import make_orbit_pair
from rclab.training import TrainingConfig, train_readout


@pytest.fixture(scope="session")
def small_config():
    return ReservoirConfig(n_neurons=60, spectral_radius=0.3, seed=11)


@pytest.fixture(scope="session")
def small_weights(small_config):
    return build_reservoir(small_config)


@pytest.fixture(scope="session")
def small_pair():
    return make_orbit_pair(8.0)


@pytest.fixture(scope="session")
def small_trained(small_config, small_weights, small_pair):
    tcfg = TrainingConfig(t_listen=5.0, t_train=25.0, ridge=1e-6)
    return train_readout(small_weights, small_config, tcfg, small_pair)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240917)
