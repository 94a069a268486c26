'''
Synthetic AR(1) series whose coefficient drifts in four different ways.

Y_t = theta_t Y_{t-1} + eps_t, eps_t ~ N(0, noise_sd^2), Y_0 = 0, t = 1..T.
'''
import enum
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from forgecast.core import Dataset
from forgecast.ingest import build_lag_features

log = logging.getLogger(__name__)

NOISE_SD = 0.05
LENGTH = 3000
AR_LAGS = 3

REGIME_COEFFICIENTS = (-0.5, 0.9)
# per-step survival probability of a regime at run length r is SURVIVAL_BASE ** r
SURVIVAL_BASE = 0.99998255


class DgpKind(enum.Enum):
    FIXED_REGIME = 'fixed_regime'
    RANDOM_WALK = 'random_walk'
    RANDOM_REGIME = 'random_regime'
    STAT = 'stat'

    @property
    def title(self):
        return {'fixed_regime': 'FixedRegime', 'random_walk': 'RandomWalk',
                'random_regime': 'RandomRegime', 'stat': 'Stat'}[self.value]


@dataclass(frozen=True)
class DgpSpec:
    kind: DgpKind
    length: int = LENGTH
    noise_sd: float = NOISE_SD

    def __post_init__(self):
        object.__setattr__(self, 'kind', DgpKind(self.kind))
        if self.length < AR_LAGS + 1:
            raise ValueError('length must be >= {0}, got {1}'.format(AR_LAGS + 1, self.length))
        if not self.noise_sd > 0:
            raise ValueError('noise_sd must be positive, got {0}'.format(self.noise_sd))


@dataclass(frozen=True, eq=False)
class RegimePath:
    '''
    indicators: i_t in {0, 1}, index into REGIME_COEFFICIENTS
    run_lengths: run length of the current regime at each step (>= 1)
    '''
    indicators: np.ndarray
    run_lengths: np.ndarray

    @property
    def theta(self):
        return np.asarray(REGIME_COEFFICIENTS)[self.indicators]


@dataclass(frozen=True, eq=False)
class SeriesPath:
    y: np.ndarray
    theta: np.ndarray
    regime: np.ndarray      # -1 where the process has no regimes


def fixed_regime_theta(length):
    t = np.arange(1, length + 1)
    return np.where((t >= 1000) & (t <= 2000), -0.9, 0.9)


def random_walk_theta(length):
    t = np.arange(1, length + 1)
    return 1.0 - t / 1500.0


def regime_path(length, rng, survival_base=SURVIVAL_BASE) -> RegimePath:
    indicators = np.empty(length, dtype=np.int64)
    run_lengths = np.empty(length, dtype=np.int64)
    current = int(rng.integers(0, 2))
    run = 1
    indicators[0], run_lengths[0] = current, run
    for t in range(1, length):
        if rng.random() < survival_base ** run:
            run += 1
        else:
            current = 1 - current
            run = 1
        indicators[t], run_lengths[t] = current, run
    return RegimePath(indicators, run_lengths)


def regime_duration_mean(survival_base=SURVIVAL_BASE, horizon=1000000):
    '''
    Expected regime duration under per-step survival survival_base ** r,
    by summing P(duration > n) = prod_{r=1}^{n} survival_base ** r.
    '''
    n = np.arange(0, horizon)
    log_survival = n * (n + 1) / 2.0 * np.log(survival_base)
    return float(np.sum(np.exp(log_survival)))


def _recurse(theta, eps):
    y = np.empty(len(eps))
    previous = 0.0
    for t in range(len(eps)):
        previous = theta[t] * previous + eps[t]
        y[t] = previous
    return y


def simulate(spec: DgpSpec, seed: int) -> SeriesPath:
    rng = np.random.default_rng(seed)
    n = spec.length
    regime = np.full(n, -1, dtype=np.int64)
    if spec.kind is DgpKind.FIXED_REGIME:
        theta = fixed_regime_theta(n)
    elif spec.kind is DgpKind.RANDOM_WALK:
        theta = random_walk_theta(n)
    elif spec.kind is DgpKind.RANDOM_REGIME:
        path = regime_path(n, rng)
        theta = path.theta
        regime = path.indicators
    else:
        theta = np.full(n, -0.5)
    eps = rng.normal(0.0, spec.noise_sd, size=n)
    return SeriesPath(y=_recurse(theta, eps), theta=theta, regime=regime)


def generate(spec: DgpSpec, seed: int) -> np.ndarray:
    return simulate(spec, seed).y


def to_supervised(y, name='') -> Dataset:
    '''
    AR(3) design: X_t = (Y_{t-1}, Y_{t-2}, Y_{t-3}) with label Y_t for
    t = 4..T, so the dataset has T - 3 samples.
    '''
    return build_lag_features(y, lags=AR_LAGS, transform='raw', name=name)


def path_frame(path: SeriesPath) -> pd.DataFrame:
    return pd.DataFrame({'t': np.arange(1, len(path.y) + 1), 'y': path.y,
                         'theta_t': path.theta, 'regime': path.regime})


def dump_series(spec: DgpSpec, seed: int, out):
    frame = path_frame(simulate(spec, seed))
    frame.to_csv(out, index=False, float_format='%.17g')
    log.info('Wrote {0} series (seed {1}, T={2}) to {3}'.format(spec.kind.value, seed, spec.length, out))
    return frame
