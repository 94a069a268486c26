'''
Parametric forgetting mechanisms alpha(age; eta).

Both families are exp(-phi(age) . eta) for a feature map phi, so weights,
Jacobians and the age-0 identity alpha(0; eta) = 1 share one code path.
'''
import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from forgecast.core import AgeVector, WeightVector

log = logging.getLogger(__name__)


class MechanismKind(enum.Enum):
    EXPONENTIAL = 'exponential'
    MIXED_DECAY = 'mixed_decay'

    @property
    def dim(self):
        return 1 if self is MechanismKind.EXPONENTIAL else 3

    def features(self, ages):
        ages = np.asarray(ages, dtype=float)
        if self is MechanismKind.EXPONENTIAL:
            return ages[:, None]
        return np.column_stack([ages, ages * ages, np.log1p(ages)])


@dataclass(frozen=True, eq=False)
class ForgettingParams:
    kind: MechanismKind
    eta: np.ndarray

    def __post_init__(self):
        kind = MechanismKind(self.kind)
        eta = np.array(self.eta, dtype=float).reshape(-1)
        if eta.shape[0] != kind.dim:
            raise ValueError('{0} takes {1} parameter(s), got {2}'
                             .format(kind.value, kind.dim, eta.shape[0]))
        if not np.all(np.isfinite(eta)):
            raise ValueError('eta must be finite, got {0}'.format(eta))
        if np.any(eta < 0):
            raise ValueError('eta must be nonnegative, got {0}'.format(eta))
        eta.setflags(write=False)
        object.__setattr__(self, 'kind', kind)
        object.__setattr__(self, 'eta', eta)

    @classmethod
    def projected(cls, kind, eta):
        '''
        Parameters clamped onto the nonnegative orthant.
        '''
        return cls(kind, np.maximum(np.asarray(eta, dtype=float), 0.0))

    @classmethod
    def zeros(cls, kind):
        kind = MechanismKind(kind)
        return cls(kind, np.zeros(kind.dim))

    @classmethod
    def from_config(cls, config):
        return cls(MechanismKind(config['kind']), config['eta'])

    def to_config(self):
        return {'kind': self.kind.value, 'eta': [float(x) for x in self.eta]}

    def __repr__(self):
        return 'ForgettingParams({0}, {1})'.format(self.kind.value, list(self.eta))


def weight(params: ForgettingParams, age) -> float:
    return float(weight_vector(params, np.array([age], dtype=float))[0])


def weight_vector(params: ForgettingParams, ages: AgeVector) -> WeightVector:
    return np.exp(-(params.kind.features(ages) @ params.eta))


def weight_jacobian(params: ForgettingParams, ages: AgeVector) -> np.ndarray:
    '''
    d alpha(age_tau; eta) / d eta_i, shape (len(ages), dim(eta)).
    '''
    phi = params.kind.features(ages)
    return -phi * np.exp(-(phi @ params.eta))[:, None]


def effective_sample_size(weights: Sequence[float]) -> float:
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0:
        return 0.0
    return float(total * total / np.sum(weights * weights))
