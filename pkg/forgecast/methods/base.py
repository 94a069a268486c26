import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from forgecast import bilevel, ridge
from forgecast.core import Dataset, SplitSpec
from forgecast.evaluation import mse

log = logging.getLogger(__name__)


@dataclass
class MethodFit:
    method: str
    valid_mse: float
    ridge_penalty: Optional[float] = None
    hyperparameters: Dict[str, Any] = field(default_factory=dict)
    model: Optional[ridge.RidgeSolution] = None
    traces: List[Tuple[int, int, float]] = field(default_factory=list)
    # (age, weight) pairs of the learned weighting, oldest first
    weight_curve: Optional[np.ndarray] = None
    test_predictions: Optional[np.ndarray] = None


class ForecastMethod(object):
    '''
    Base class for every forecasting method the harness can run.

    A method is validated against its JSON config section, fitted on the
    train/validation part of a split and then asked for test predictions.
    '''
    config = None
    uses_ridge_grid = True

    def info(self):
        raise NotImplementedError

    @property
    def name(self):
        return self.info()['name']

    def _set_config(self, config_str):
        if config_str:
            self.config = json.loads(config_str)
            log.debug('Using config for {0}: {1!r}'.format(self.name, self.config))
        else:
            self.config = {}

    def validate_config(self, config):
        '''
        Methods can provide this to validate their section of the experiment
        config. It takes and returns a JSON string; a ValueError with a
        readable message is raised for bad settings.

        :param config: JSON string of the method's settings
        :returns: validated JSON string
        '''
        if not config:
            return json.dumps({})
        config_obj = json.loads(config)
        if not isinstance(config_obj, dict):
            raise ValueError('{0} settings must be a JSON object'.format(self.name))
        config_obj.pop('name', None)
        allowed = set(self.settings())
        unknown = set(config_obj) - allowed
        if unknown:
            raise ValueError('Unknown settings for {0}: {1}'.format(self.name, ', '.join(sorted(unknown))))
        return json.dumps(config_obj, sort_keys=True)

    def settings(self):
        return ()

    def fit_stage(self, dataset: Dataset, split: SplitSpec, solver: ridge.SolverConfig,
                  seed: int = 0) -> MethodFit:
        raise NotImplementedError

    def predict_stage(self, fit: MethodFit, dataset: Dataset, split: SplitSpec):
        if fit.test_predictions is not None:
            return fit.test_predictions
        X, _ = dataset.test(split)
        return bilevel.predict(fit.model, X)

    def _validation_mse(self, solution, dataset, split):
        X, y = dataset.valid(split)
        return mse(bilevel.predict(solution, X), y)


def grid_argmin(candidates, score):
    '''
    Evaluate `score` over candidates ordered from longest to shortest
    effective memory and keep the first minimum, so ties favour the longest
    memory. Candidates whose fit is singular are skipped.

    :returns: (best candidate, best score, best payload)
    '''
    best = None
    failures = 0
    for candidate in candidates:
        try:
            value, payload = score(candidate)
        except (ridge.SingularMatrixError, ridge.DegenerateWeightsError) as e:
            log.debug('Skipping grid value {0}: {1}'.format(candidate, e))
            failures += 1
            continue
        if best is None or value < best[1]:
            best = (candidate, value, payload)
    if best is None:
        raise ridge.SingularMatrixError('All {0} grid candidates produced singular fits'.format(failures))
    return best
