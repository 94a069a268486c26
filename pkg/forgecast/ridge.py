'''
Weighted ridge regression: the lower level of the forgetting problem.

g^L(eta, theta) = sum_tau w_tau (y_tau - x_tau' theta)^2 + ridge_penalty |theta|^2
with w_tau = alpha(t* - tau; eta). Its Hessian in theta is 2G where
G = X' diag(w) X + ridge_penalty I; the factor 2 is applied explicitly.
'''
import enum
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from forgecast import forgetting
from forgecast.core import Dataset, DimensionError, SplitSpec, WeightVector, ages_of

log = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-12


class HessianMode(enum.Enum):
    EXACT = 'exact'
    IDENTITY = 'identity'


@dataclass(frozen=True)
class SolverConfig:
    ridge_penalty: float = 0.0
    hessian_mode: HessianMode = HessianMode.EXACT

    def __post_init__(self):
        if not np.isfinite(self.ridge_penalty) or self.ridge_penalty < 0:
            raise ValueError('ridge_penalty must be finite and >= 0, got {0}'.format(self.ridge_penalty))
        object.__setattr__(self, 'hessian_mode', HessianMode(self.hessian_mode))


@dataclass(frozen=True, eq=False)
class RidgeSolution:
    '''
    theta: fitted coefficients
    gram: G = sum_tau w_tau x_tau x_tau' + ridge_penalty I
    residuals: y_tau - x_tau' theta on the rows the fit used
    factor: Cholesky factor of G as returned by scipy.linalg.cho_factor
    '''
    theta: np.ndarray
    gram: np.ndarray
    residuals: np.ndarray
    factor: tuple

    @property
    def dim(self):
        return self.theta.shape[0]

    def solve_gram(self, rhs):
        return linalg.cho_solve(self.factor, rhs)


def _check_weights(weights, expected):
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (expected,):
        raise DimensionError('Expected {0} weights, got shape {1}'.format(expected, weights.shape))
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise ValueError('Weights must be finite and nonnegative')
    return weights


def _check_theta(theta, dim):
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != dim:
        raise DimensionError('theta has dimension {0}, dataset has d={1}'.format(theta.shape[0], dim))
    return theta


def lower_objective(dataset: Dataset, split: SplitSpec, weights: WeightVector, theta,
                    cfg: SolverConfig) -> float:
    X, y = dataset.train(split)
    weights = _check_weights(weights, split.train_end)
    theta = _check_theta(theta, dataset.dim)
    r = y - X @ theta
    return float(np.sum(weights * r * r) + cfg.ridge_penalty * (theta @ theta))


def _factorize(gram):
    diag = np.diag(gram)
    scale = diag.max() if diag.size else 0.0
    rank_defect = None
    if scale <= 0:
        rank_defect = gram.shape[0]
    else:
        try:
            factor = linalg.cho_factor(gram, lower=True, check_finite=False)
        except linalg.LinAlgError:
            factor = None
        if factor is not None:
            pivots = np.diag(factor[0]) ** 2
            if pivots.min() >= PIVOT_TOLERANCE * scale:
                return factor
        rank = np.linalg.matrix_rank(gram, tol=PIVOT_TOLERANCE * scale)
        rank_defect = gram.shape[0] - rank
    raise SingularMatrixError('Gram matrix of dimension {0} is singular (rank defect {1})'
                              .format(gram.shape[0], max(rank_defect, 1)))


def solve_weighted(features, labels, weights, cfg: SolverConfig) -> RidgeSolution:
    '''
    Closed-form weighted ridge fit on arbitrary rows.

    :param features: (n, d) design
    :param labels: (n,) targets
    :param weights: (n,) nonnegative sample weights
    :param cfg: SolverConfig
    :returns: RidgeSolution
    '''
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    weights = _check_weights(weights, X.shape[0])
    if not np.any(weights > 0):
        raise DegenerateWeightsError('All {0} sample weights are zero; the fit is undefined'
                                     .format(weights.shape[0]))

    Xw = X * weights[:, None]
    gram = Xw.T @ X
    gram.flat[::gram.shape[0] + 1] += cfg.ridge_penalty
    factor = _factorize(gram)
    theta = linalg.cho_solve(factor, Xw.T @ y)
    return RidgeSolution(theta=theta, gram=gram, residuals=y - X @ theta, factor=factor)


def solve(dataset: Dataset, split: SplitSpec, weights: WeightVector, cfg: SolverConfig) -> RidgeSolution:
    X, y = dataset.train(split)
    return solve_weighted(X, y, weights, cfg)


def implicit_jacobian(solution: RidgeSolution, dataset: Dataset, split: SplitSpec,
                      weight_jac: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    '''
    d theta_hat / d eta through the argmin, shape (d, dim(eta)).

    Column i is -(grad^2_theta g^L)^-1 d(grad_theta g^L)/d eta_i at theta_hat,
    with grad^2_theta g^L = 2G and
    d(grad_theta g^L)/d eta_i = -2 sum_tau (d w_tau / d eta_i) x_tau r_tau.
    '''
    X, _ = dataset.train(split)
    weight_jac = np.asarray(weight_jac, dtype=float)
    if weight_jac.ndim != 2 or weight_jac.shape[0] != X.shape[0]:
        raise DimensionError('weight_jac must have {0} rows, got shape {1}'
                             .format(X.shape[0], weight_jac.shape))

    mixed = -2.0 * (X.T @ (weight_jac * solution.residuals[:, None]))
    if cfg.hessian_mode is HessianMode.IDENTITY:
        return -mixed
    return -solution.solve_gram(mixed) / 2.0


def _valid_rows(split: SplitSpec, valid_subset: Optional[Sequence[int]]):
    if valid_subset is None:
        return np.arange(split.train_end, split.valid_end)
    offsets = np.asarray(valid_subset, dtype=np.int64).reshape(-1)
    if offsets.size == 0:
        raise ValueError('Validation subset is empty')
    if offsets.min() < 0 or offsets.max() >= split.valid_len:
        raise ValueError('Validation subset offsets must lie in [0, {0})'.format(split.valid_len))
    return split.train_end + offsets


def validation_loss(solution: RidgeSolution, dataset: Dataset, split: SplitSpec,
                    valid_subset: Optional[Sequence[int]] = None) -> float:
    rows = _valid_rows(split, valid_subset)
    r = dataset.labels[rows] - dataset.features[rows] @ solution.theta
    return float(r @ r)


def upper_gradient(eta: forgetting.ForgettingParams, dataset: Dataset, split: SplitSpec,
                   valid_subset: Optional[Sequence[int]], cfg: SolverConfig):
    '''
    Total derivative of g^U(eta, theta_hat(eta)) over the validation rows
    in `valid_subset` (offsets into the validation segment, None for all).
    g^U has no direct dependence on eta, so only the implicit term remains.

    :returns: (gradient of shape (dim(eta),), validation loss)
    '''
    rows = _valid_rows(split, valid_subset)
    ages = ages_of(split)
    solution = solve(dataset, split, forgetting.weight_vector(eta, ages), cfg)
    jac = implicit_jacobian(solution, dataset, split, forgetting.weight_jacobian(eta, ages), cfg)

    Xv = dataset.features[rows]
    rv = dataset.labels[rows] - Xv @ solution.theta
    grad_theta = -2.0 * (Xv.T @ rv)
    return grad_theta @ jac, float(rv @ rv)


class SingularMatrixError(ArithmeticError):
    pass


class DegenerateWeightsError(ValueError):
    pass
