'''
Upper level of the forgetting problem: mini-batch SGD with momentum on eta.

Batches are drawn from the validation segment only and each step uses the
mean gradient over its batch. The lower level is re-solved in closed
form on the full training segment before every gradient, so theta_hat is
always the exact argmin the implicit Jacobian assumes.
'''
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from forgecast import forgetting, ridge
from forgecast.core import Dataset, DimensionError, SplitSpec, ages_of

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    step_size: float = 0.1
    momentum: float = 0.9
    epochs: int = 50
    batch_size: int = 32
    restarts: int = 5
    init_low: float = 0.0
    init_high: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.step_size >= 0:
            raise ValueError('step_size must be >= 0, got {0}'.format(self.step_size))
        if not 0 <= self.momentum < 1:
            raise ValueError('momentum must lie in [0, 1), got {0}'.format(self.momentum))
        for name in ('epochs', 'batch_size', 'restarts'):
            if int(getattr(self, name)) < 1:
                raise ValueError('{0} must be >= 1'.format(name))
        if self.init_low > self.init_high:
            raise ValueError('init_low must not exceed init_high')

    @classmethod
    def from_config(cls, config):
        unknown = set(config) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError('Unknown optimizer settings: {0}'.format(', '.join(sorted(unknown))))
        return cls(**config)


@dataclass
class RestartTrace:
    restart: int
    init_eta: np.ndarray
    eta: Optional[forgetting.ForgettingParams] = None
    losses: List[Tuple[int, float]] = field(default_factory=list)
    failed: bool = False
    error: str = ''

    @property
    def final_loss(self):
        return self.losses[-1][1] if self.losses and not self.failed else None


@dataclass
class BilevelResult:
    best_eta: forgetting.ForgettingParams
    best_valid_loss: float
    restart_traces: List[RestartTrace]
    final_model: ridge.RidgeSolution

    def trace_rows(self):
        '''
        (restart, epoch, valid_loss) rows of every restart that finished.
        '''
        return [(t.restart, epoch, loss)
                for t in self.restart_traces if not t.failed
                for epoch, loss in t.losses]


class SGDMomentum(object):

    def __init__(self, step_size=0.1, momentum=0.9):
        self.step_size = step_size
        self.momentum = momentum
        self.velocity = None

    def reset(self):
        self.velocity = None

    def step(self, params, grad):
        # v <- momentum * v - step_size * g ; params <- params + v
        if self.velocity is None:
            self.velocity = np.zeros_like(params)
        self.velocity = self.momentum * self.velocity - self.step_size * grad
        return params + self.velocity

    def clamp(self, params):
        '''
        Project onto the nonnegative orthant. Coordinates that land outside
        it lose their velocity.
        '''
        params = np.asarray(params, dtype=float)
        outside = params < 0
        if self.velocity is not None and np.any(outside):
            self.velocity = np.where(outside, 0.0, self.velocity)
        return np.maximum(params, 0.0)


def _full_validation_loss(eta, dataset, split, solver):
    solution = ridge.solve(dataset, split, forgetting.weight_vector(eta, ages_of(split)), solver)
    return ridge.validation_loss(solution, dataset, split)


def _run_restart(restart, rng, dataset, split, kind, solver, opt, optimizer):
    init = rng.uniform(opt.init_low, opt.init_high, size=kind.dim)
    trace = RestartTrace(restart=restart, init_eta=init)
    eta = forgetting.ForgettingParams.projected(kind, init)
    optimizer.reset()
    n_valid = split.valid_len

    try:
        for epoch in range(opt.epochs):
            order = rng.permutation(n_valid)
            for start in range(0, n_valid, opt.batch_size):
                batch = order[start:start + opt.batch_size]
                grad, _ = ridge.upper_gradient(eta, dataset, split, batch, solver)
                # mean gradient over the batch
                step = optimizer.step(eta.eta, grad / len(batch))
                eta = forgetting.ForgettingParams(kind, optimizer.clamp(step))
            loss = _full_validation_loss(eta, dataset, split, solver)
            if not np.isfinite(loss):
                raise FloatingPointError('validation loss is not finite at {0!r}'.format(eta))
            trace.losses.append((epoch, loss))
            log.debug('restart {0} epoch {1}: eta={2} valid_loss={3:.6g}'
                      .format(restart, epoch, list(eta.eta), loss))
    except (ridge.SingularMatrixError, FloatingPointError) as e:
        log.warning('Restart {0} failed at {1!r}: {2}'.format(restart, eta, e))
        trace.failed = True
        trace.error = str(e)
    trace.eta = eta
    return trace


def fit(dataset: Dataset, split: SplitSpec, kind, solver: ridge.SolverConfig,
        opt: OptimizerConfig) -> BilevelResult:
    '''
    Learn eta by gradient descent with restarts, keep the restart whose final
    eta has the lowest full validation loss, then refit on train+validation.
    '''
    kind = forgetting.MechanismKind(kind)
    split.check_fits(dataset)
    log.debug('In bilevel fit: {0}, {1} restarts x {2} epochs'.format(kind.value, opt.restarts, opt.epochs))

    # one independent stream per restart so restarts can run in any order
    streams = np.random.SeedSequence(opt.rng_seed).spawn(opt.restarts)
    optimizer = SGDMomentum(opt.step_size, opt.momentum)
    traces = [_run_restart(i, np.random.default_rng(s), dataset, split, kind, solver, opt, optimizer)
              for i, s in enumerate(streams)]

    finished = [t for t in traces if not t.failed]
    if not finished:
        raise AllRestartsFailedError('All {0} restarts failed for {1}: {2}'
                                     .format(len(traces), kind.value, traces[-1].error))
    best = min(finished, key=lambda t: (t.final_loss, t.restart))
    log.info('Best restart {0}: eta={1} valid_loss={2:.6g}'
             .format(best.restart, list(best.eta.eta), best.final_loss))

    return BilevelResult(best_eta=best.eta,
                         best_valid_loss=best.final_loss,
                         restart_traces=traces,
                         final_model=refit(dataset, split, best.eta, solver))


def refit_weights(split: SplitSpec, eta: forgetting.ForgettingParams) -> np.ndarray:
    '''
    Training rows keep alpha(t* - tau; eta); every validation row gets the
    weight of the last training row, alpha(0; eta).
    '''
    train = forgetting.weight_vector(eta, ages_of(split))
    return np.concatenate([train, np.full(split.valid_len, forgetting.weight(eta, 0))])


def refit(dataset: Dataset, split: SplitSpec, eta: forgetting.ForgettingParams,
          solver: ridge.SolverConfig) -> ridge.RidgeSolution:
    rows = slice(0, split.valid_end)
    return ridge.solve_weighted(dataset.features[rows], dataset.labels[rows],
                                refit_weights(split, eta), solver)


def predict(model: ridge.RidgeSolution, features):
    '''
    x' theta_hat for one feature vector, or row-wise for a matrix.
    '''
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != model.dim:
        raise DimensionError('Feature dimension {0} does not match model dimension {1}'
                             .format(features.shape[-1], model.dim))
    if features.ndim == 1:
        return float(features @ model.theta)
    return features @ model.theta


class AllRestartsFailedError(RuntimeError):
    pass
