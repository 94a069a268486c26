import json
import logging
import math

import numpy as np

from forgecast import bilevel, forgetting, ridge
from forgecast.core import ages_of
from forgecast.methods.base import ForecastMethod, MethodFit, grid_argmin
from forgecast.methods.window import GRID_SIZE, window_grid

log = logging.getLogger(__name__)

# weight left at age w by the decay matched to window length w
SPAN_CUTOFF = 0.01


def eta_for_window(window, cutoff=SPAN_CUTOFF):
    '''
    eta_1 such that exp(-eta_1 * window) == cutoff.
    '''
    return math.log(1.0 / cutoff) / window


def fit_grid_exp(dataset, split, solver, window_grid, cutoff=SPAN_CUTOFF):
    '''
    Grid search of the exponential decay rate, one candidate per window
    length plus eta_1 = 0 (no forgetting), scored by validation MSE of the
    train-only fit.

    :returns: (RidgeSolution refitted on train+validation, chosen eta_1)
    '''
    if not window_grid:
        raise ValueError('Window grid is empty')
    etas = [0.0] + sorted(eta_for_window(w, cutoff) for w in window_grid)
    ages = ages_of(split)
    X_valid, y_valid = dataset.valid(split)

    def score(eta1):
        params = forgetting.ForgettingParams(forgetting.MechanismKind.EXPONENTIAL, [eta1])
        solution = ridge.solve(dataset, split, forgetting.weight_vector(params, ages), solver)
        r = y_valid - X_valid @ solution.theta
        return float(np.mean(r * r)), params

    # smallest decay rate first: ties keep the longest memory, down to Stationary
    eta1, valid_mse, params = grid_argmin(etas, score)
    log.debug('Chosen eta_1 {0:.6g} with validation MSE {1:.6g}'.format(eta1, valid_mse))
    return bilevel.refit(dataset, split, params, solver), eta1


class GridSearchExpMethod(ForecastMethod):

    def info(self):
        return {
            'name': 'grid_search_exp',
            'title': 'GridSearchExp',
            'description': 'Exponential forgetting with the decay rate grid searched on the validation set'
        }

    def settings(self):
        return ('grid_size', 'cutoff')

    def validate_config(self, config):
        config = super(GridSearchExpMethod, self).validate_config(config)
        config_obj = json.loads(config)
        if 'grid_size' in config_obj:
            if not isinstance(config_obj['grid_size'], int) or config_obj['grid_size'] < 1:
                raise ValueError('grid_search_exp grid_size must be a positive integer')
        if 'cutoff' in config_obj:
            cutoff = config_obj['cutoff']
            if not isinstance(cutoff, (int, float)) or not 0 < cutoff < 1:
                raise ValueError('grid_search_exp cutoff must lie in (0, 1)')
        return config

    def fit_stage(self, dataset, split, solver, seed=0):
        log.debug('In GridSearchExpMethod fit_stage')
        config = self.config or {}
        grid = window_grid(split.train_end, config.get('grid_size', GRID_SIZE))
        model, eta1 = fit_grid_exp(dataset, split, solver, grid, config.get('cutoff', SPAN_CUTOFF))

        params = forgetting.ForgettingParams(forgetting.MechanismKind.EXPONENTIAL, [eta1])
        ages = ages_of(split)
        weights = forgetting.weight_vector(params, ages)
        train_fit = ridge.solve(dataset, split, weights, solver)
        log.info('grid_search_exp: eta_1={0:.6g}, effective sample size {1:.1f}'
                 .format(eta1, forgetting.effective_sample_size(weights)))
        return MethodFit(method=self.name,
                         valid_mse=self._validation_mse(train_fit, dataset, split),
                         ridge_penalty=solver.ridge_penalty,
                         hyperparameters={'eta': params.to_config()['eta']},
                         model=model,
                         weight_curve=np.column_stack([ages, weights]))
