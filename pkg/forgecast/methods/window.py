import json
import logging

import numpy as np

from forgecast import ridge
from forgecast.core import ages_of
from forgecast.methods.base import ForecastMethod, MethodFit, grid_argmin

log = logging.getLogger(__name__)

GRID_SIZE = 25
MIN_WINDOW = 5


def window_grid(train_len, size=GRID_SIZE, low=MIN_WINDOW):
    '''
    `size` integer window lengths linearly spaced in [low, train_len],
    sorted ascending with duplicates removed.
    '''
    if train_len < 1:
        raise ValueError('Training length must be >= 1')
    low = min(low, train_len)
    values = np.rint(np.linspace(low, train_len, size)).astype(np.int64)
    return [int(v) for v in np.unique(values)]


def window_weights(split, window):
    return (ages_of(split) < window).astype(float)


def _refit_window(dataset, split, window, solver):
    # the chosen window keeps its start and is extended by the validation rows
    start = max(split.train_end - window, 0)
    rows = slice(start, split.valid_end)
    return ridge.solve_weighted(dataset.features[rows], dataset.labels[rows],
                                np.ones(split.valid_end - start), solver)


def fit_window(dataset, split, solver, grid):
    '''
    Pick the window length with the lowest validation MSE and refit.

    :param grid: candidate window lengths, each <= train_end
    :returns: (RidgeSolution from the refit, chosen window length)
    '''
    if not grid:
        raise ValueError('Window grid is empty')
    if max(grid) > split.train_end or min(grid) < 1:
        raise ValueError('Window lengths must lie in [1, {0}], got {1}'.format(split.train_end, grid))

    X_valid, y_valid = dataset.valid(split)

    def score(window):
        solution = ridge.solve(dataset, split, window_weights(split, window), solver)
        r = y_valid - X_valid @ solution.theta
        return float(np.mean(r * r)), solution

    # longest window first: ties keep the larger effective sample
    window, valid_mse, _ = grid_argmin(sorted(grid, reverse=True), score)
    log.debug('Chosen window {0} with validation MSE {1:.6g}'.format(window, valid_mse))
    return _refit_window(dataset, split, window, solver), window


class WindowMethod(ForecastMethod):

    def info(self):
        return {
            'name': 'window',
            'title': 'Window',
            'description': 'Uniform weights on a fixed-length interval of the most recent samples'
        }

    def settings(self):
        return ('grid_size',)

    def validate_config(self, config):
        config = super(WindowMethod, self).validate_config(config)
        config_obj = json.loads(config)
        if 'grid_size' in config_obj:
            if not isinstance(config_obj['grid_size'], int) or config_obj['grid_size'] < 1:
                raise ValueError('window grid_size must be a positive integer')
        return config

    def fit_stage(self, dataset, split, solver, seed=0):
        log.debug('In WindowMethod fit_stage')
        grid = window_grid(split.train_end, (self.config or {}).get('grid_size', GRID_SIZE))
        model, window = fit_window(dataset, split, solver, grid)
        train_fit = ridge.solve(dataset, split, window_weights(split, window), solver)
        ages = ages_of(split)
        return MethodFit(method=self.name,
                         valid_mse=self._validation_mse(train_fit, dataset, split),
                         ridge_penalty=solver.ridge_penalty,
                         hyperparameters={'window': window},
                         model=model,
                         weight_curve=np.column_stack([ages, window_weights(split, window)]))
