'''
Regression with random-walk coefficients, filtered with the Kalman recursion.

    theta_t = theta_{t-1} + nu_t,      nu_t  ~ N(0, q I)
    y_t     = x_t' theta_t + eps_t,    eps_t ~ N(0, sigma^2)
'''
import json
import logging
from dataclasses import dataclass

import numpy as np

from forgecast.core import Dataset, SplitSpec
from forgecast.evaluation import mse
from forgecast.methods.base import ForecastMethod, MethodFit

log = logging.getLogger(__name__)

# state_var / obs_var ratios searched by default, longest memory first
DEFAULT_RATIOS = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
DEFAULT_INIT_COV = 1e3


@dataclass(frozen=True)
class StateSpaceConfig:
    obs_var: float = 1.0
    state_var: float = 1e-4
    init_cov: float = DEFAULT_INIT_COV

    def __post_init__(self):
        for name in ('obs_var', 'init_cov'):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError('{0} must be positive, got {1}'.format(name, value))
        if not (np.isfinite(self.state_var) and self.state_var >= 0):
            raise ValueError('state_var must be >= 0, got {0}'.format(self.state_var))


@dataclass
class FilterResult:
    predictions: np.ndarray     # one-step-ahead predictive means, one per row
    innovations: np.ndarray     # y_t - x_t' theta_{t|t-1}
    innovation_vars: np.ndarray
    theta: np.ndarray           # filtered mean after the last row
    cov: np.ndarray


def kalman_filter(features, labels, cfg: StateSpaceConfig) -> FilterResult:
    '''
    Run the recursion from the prior theta_0 = 0, P_0 = init_cov I.

    Each row is predicted before its label is used, so `predictions` are
    genuine one-step-ahead forecasts.
    '''
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    n, d = X.shape
    theta = np.zeros(d)
    P = cfg.init_cov * np.eye(d)
    state_noise = cfg.state_var * np.eye(d)

    predictions = np.empty(n)
    innovations = np.empty(n)
    variances = np.empty(n)
    for t in range(n):
        x = X[t]
        P = P + state_noise
        Px = P @ x
        f = x @ Px + cfg.obs_var
        if not (np.isfinite(f) and f > 0):
            raise KalmanNumericalError('Innovation variance {0} at row {1} is not positive'.format(f, t))
        y_hat = x @ theta
        e = y[t] - y_hat
        gain = Px / f
        theta = theta + gain * e
        P = P - np.outer(gain, Px)
        P = (P + P.T) / 2.0

        predictions[t] = y_hat
        innovations[t] = e
        variances[t] = f
    return FilterResult(predictions, innovations, variances, theta, P)


def profile_obs_var(result: FilterResult, cfg: StateSpaceConfig, rows=slice(None)):
    '''
    Scale estimate of sigma^2: the mean standardized squared innovation.
    One-step predictions do not change when (q, sigma^2, P_0) are scaled
    together, so this only rescales the reported config.
    '''
    e = result.innovations[rows]
    f = result.innovation_vars[rows]
    return float(np.mean(e * e / f) * cfg.obs_var)


def kalman_fit_predict(dataset: Dataset, split: SplitSpec, cfg_grid):
    '''
    Select the config with the lowest one-step validation MSE and return
    its one-step test predictions.

    :returns: (test predictions, chosen config with profiled obs_var, validation MSE)
    '''
    cfg_grid = list(cfg_grid)
    if not cfg_grid:
        raise ValueError('State-space config grid is empty')

    rows = slice(0, split.test_end)
    X, y = dataset.features[rows], dataset.labels[rows]
    valid = split.valid_slice
    best = None
    for cfg in cfg_grid:
        result = kalman_filter(X, y, cfg)
        valid_mse = mse(result.predictions[valid], y[valid])
        log.debug('state_space q={0:.3g} sigma2={1:.3g}: validation MSE {2:.6g}'
                  .format(cfg.state_var, cfg.obs_var, valid_mse))
        if best is None or valid_mse < best[1]:
            best = (cfg, valid_mse, result)

    cfg, valid_mse, result = best
    scale = profile_obs_var(result, cfg, split.train_slice) / cfg.obs_var
    chosen = StateSpaceConfig(obs_var=cfg.obs_var * scale,
                              state_var=cfg.state_var * scale,
                              init_cov=cfg.init_cov * scale)
    return result.predictions[split.test_slice], chosen, valid_mse


def ratio_grid(ratios=DEFAULT_RATIOS, init_cov=DEFAULT_INIT_COV):
    return [StateSpaceConfig(obs_var=1.0, state_var=r, init_cov=init_cov) for r in sorted(ratios)]


class StateSpaceMethod(ForecastMethod):
    uses_ridge_grid = False

    def info(self):
        return {
            'name': 'state_space',
            'title': 'StateSpace',
            'description': 'Random-walk regression coefficients filtered with the Kalman recursion'
        }

    def settings(self):
        return ('ratios', 'init_cov')

    def validate_config(self, config):
        config = super(StateSpaceMethod, self).validate_config(config)
        config_obj = json.loads(config)
        ratios = config_obj.get('ratios')
        if ratios is not None:
            if not isinstance(ratios, list) or not ratios or \
                    not all(isinstance(r, (int, float)) and r > 0 for r in ratios):
                raise ValueError('state_space ratios must be a non-empty list of positive numbers')
        init_cov = config_obj.get('init_cov')
        if init_cov is not None and not (isinstance(init_cov, (int, float)) and init_cov > 0):
            raise ValueError('state_space init_cov must be positive')
        return config

    def fit_stage(self, dataset, split, solver=None, seed=0):
        log.debug('In StateSpaceMethod fit_stage')
        config = self.config or {}
        grid = ratio_grid(config.get('ratios', DEFAULT_RATIOS), config.get('init_cov', DEFAULT_INIT_COV))
        predictions, chosen, valid_mse = kalman_fit_predict(dataset, split, grid)
        return MethodFit(method=self.name,
                         valid_mse=valid_mse,
                         hyperparameters={'obs_var': chosen.obs_var, 'state_var': chosen.state_var,
                                          'init_cov': chosen.init_cov},
                         test_predictions=predictions)


class KalmanNumericalError(ArithmeticError):
    pass
