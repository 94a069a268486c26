import logging

import numpy as np

from forgecast import ridge
from forgecast.core import ages_of
from forgecast.methods.base import ForecastMethod, MethodFit

log = logging.getLogger(__name__)


def fit_stationary(dataset, split, solver, refit=True):
    '''
    Unweighted fit: all-ones weights over train, or over train+validation
    when `refit` is set (the model used on the test segment).
    '''
    end = split.valid_end if refit else split.train_end
    return ridge.solve_weighted(dataset.features[:end], dataset.labels[:end], np.ones(end), solver)


class StationaryMethod(ForecastMethod):

    def info(self):
        return {
            'name': 'stationary',
            'title': 'Stationary',
            'description': 'Ridge regression on unweighted historical samples'
        }

    def fit_stage(self, dataset, split, solver, seed=0):
        log.debug('In StationaryMethod fit_stage')
        train_fit = fit_stationary(dataset, split, solver, refit=False)
        ages = ages_of(split)
        return MethodFit(method=self.name,
                         valid_mse=self._validation_mse(train_fit, dataset, split),
                         ridge_penalty=solver.ridge_penalty,
                         model=fit_stationary(dataset, split, solver),
                         weight_curve=np.column_stack([ages, np.ones(split.train_end)]))
