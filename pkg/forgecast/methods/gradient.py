import json
import logging

import numpy as np

from forgecast import bilevel, forgetting, ridge
from forgecast.core import ages_of
from forgecast.helpers import derive_seed
from forgecast.methods.base import ForecastMethod, MethodFit

log = logging.getLogger(__name__)


class GradientForgettingMethod(ForecastMethod):
    '''
    Forgetting mechanism learned by bi-level gradient descent, then refitted
    on train+validation.
    '''
    kind = None

    def settings(self):
        return ('optimizer', 'hessian_mode')

    def validate_config(self, config):
        config = super(GradientForgettingMethod, self).validate_config(config)
        config_obj = json.loads(config)
        if 'optimizer' in config_obj:
            if not isinstance(config_obj['optimizer'], dict):
                raise ValueError('{0} optimizer must be a JSON object'.format(self.name))
            try:
                bilevel.OptimizerConfig.from_config(config_obj['optimizer'])
            except TypeError as e:
                raise ValueError('Invalid optimizer settings for {0}: {1}'.format(self.name, e))
        if 'hessian_mode' in config_obj:
            try:
                ridge.HessianMode(config_obj['hessian_mode'])
            except ValueError:
                raise ValueError('hessian_mode must be one of {0}'
                                 .format(', '.join(m.value for m in ridge.HessianMode)))
        return config

    def _optimizer(self, seed):
        settings = dict((self.config or {}).get('optimizer', {}))
        settings.setdefault('rng_seed', derive_seed(seed, self.name))
        return bilevel.OptimizerConfig.from_config(settings)

    def fit_stage(self, dataset, split, solver, seed=0):
        log.debug('In {0} fit_stage'.format(type(self).__name__))
        mode = (self.config or {}).get('hessian_mode')
        if mode:
            solver = ridge.SolverConfig(solver.ridge_penalty, ridge.HessianMode(mode))

        result = bilevel.fit(dataset, split, self.kind, solver, self._optimizer(seed))
        ages = ages_of(split)
        weights = forgetting.weight_vector(result.best_eta, ages)
        log.info('{0}: eta={1}, effective sample size {2:.1f}'
                 .format(self.name, list(result.best_eta.eta), forgetting.effective_sample_size(weights)))
        return MethodFit(method=self.name,
                         valid_mse=result.best_valid_loss / split.valid_len,
                         ridge_penalty=solver.ridge_penalty,
                         hyperparameters={'eta': result.best_eta.to_config()['eta']},
                         model=result.final_model,
                         traces=result.trace_rows(),
                         weight_curve=np.column_stack([ages, weights]))


class GradExpMethod(GradientForgettingMethod):
    kind = forgetting.MechanismKind.EXPONENTIAL

    def info(self):
        return {
            'name': 'grad_exp',
            'title': 'GradExp',
            'description': 'Exponential forgetting learned by bi-level gradient descent'
        }


class GradMixedDecayMethod(GradientForgettingMethod):
    kind = forgetting.MechanismKind.MIXED_DECAY

    def info(self):
        return {
            'name': 'grad_mixed_decay',
            'title': 'GradMixedDecay',
            'description': 'Mixed linear, quadratic and logarithmic decay learned by bi-level gradient descent'
        }
