import numpy as np
import pytest

from forgecast.core import Dataset, make_split


def linear_dataset(length=60, dim=2, seed=0, noise=0.1, name='toy'):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(length, dim))
    theta = np.linspace(0.5, -0.5, dim)
    y = X @ theta + noise * rng.normal(size=length)
    return Dataset(features=X, labels=y, name=name)


@pytest.fixture
def toy_dataset():
    return linear_dataset()


@pytest.fixture
def toy_split():
    return make_split(60, 40, 15, 5)


@pytest.fixture
def drifting_dataset():
    '''
    AR(1)-like toy series of length 50 whose coefficient flips sign half way.
    '''
    rng = np.random.default_rng(7)
    y = np.zeros(53)
    for t in range(1, 53):
        theta = 0.9 if t < 26 else -0.9
        y[t] = theta * y[t - 1] + 0.05 * rng.normal()
    X = np.column_stack([y[2:-1], y[1:-2], y[:-3]])
    return Dataset(features=X, labels=y[3:], name='drift')


@pytest.fixture
def small_synthetic_config(tmp_path):
    def _config(methods=None, runs=2, kind='stat', **extra):
        config = {
            'experiment': 'synthetic',
            'dataset': {'kind': kind, 'runs': runs, 'length': 300},
            'split': {'train_end': 200, 'valid_len': 50, 'test_len': 20},
            'methods': methods or [{'name': 'stationary'}, {'name': 'window', 'grid_size': 5}],
            'ridge_grid': [0, 1e-3],
            'output_dir': str(tmp_path / 'out'),
            'seed': 11,
            'parallelism': 1,
        }
        config.update(extra)
        return config
    return _config
