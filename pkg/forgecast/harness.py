'''
Experiment runners: synthetic Monte Carlo and walk-forward evaluation of
real series, both driven by one JSON config.
'''
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from forgecast import evaluation, ingest, synthgen
from forgecast.core import Dataset, SplitSpec, make_split
from forgecast.forgetting import effective_sample_size
from forgecast.helpers import format_float, thread_cap
from forgecast.methods import get_method, registered_methods
from forgecast.ridge import SolverConfig

log = logging.getLogger(__name__)

RIDGE_GRID = (1e-3, 1e-4, 1e-5, 1e-6, 0.0)
TRADING_DAYS_PER_YEAR = 252
MAX_FAILED_FRACTION = 0.05
TASKS = ('lag_volatility', 'factor', 'raw_lags')
DEFAULT_LAGS = {'lag_volatility': 5, 'raw_lags': synthgen.AR_LAGS}


@dataclass(frozen=True)
class ExpandingCvSpec:
    initial_train_days: int = 6 * TRADING_DAYS_PER_YEAR
    valid_days: int = 150
    test_days: int = 150
    step_days: int = 150

    def __post_init__(self):
        for name in ('initial_train_days', 'valid_days', 'test_days', 'step_days'):
            if int(getattr(self, name)) < 1:
                raise ValueError('cv {0} must be >= 1'.format(name))


@dataclass(frozen=True)
class SplitConfig:
    train_end: int = 2875
    valid_len: int = 100
    test_len: int = 25


@dataclass
class ExperimentConfig:
    experiment: str
    dataset: Dict
    methods: List[Tuple[str, str]]
    name: str = ''
    split: SplitConfig = SplitConfig()
    cv: ExpandingCvSpec = ExpandingCvSpec()
    ridge_grid: Tuple[float, ...] = RIDGE_GRID
    output_dir: Optional[str] = None
    seed: int = 0
    parallelism: int = 1

    @classmethod
    def from_dict(cls, config_obj):
        return cls(experiment=config_obj['experiment'],
                   dataset=config_obj['dataset'],
                   methods=[(m['name'], json.dumps({k: v for k, v in m.items() if k != 'name'}, sort_keys=True))
                            for m in config_obj['methods']],
                   name=config_obj.get('name', ''),
                   split=SplitConfig(**config_obj.get('split', {})),
                   cv=ExpandingCvSpec(**config_obj.get('cv', {})),
                   ridge_grid=tuple(float(x) for x in config_obj.get('ridge_grid', RIDGE_GRID)),
                   output_dir=config_obj.get('output_dir'),
                   seed=int(config_obj.get('seed', 0)),
                   parallelism=int(config_obj.get('parallelism', 1)))

    @property
    def dataset_label(self):
        if self.name:
            return self.name
        if self.experiment == 'synthetic':
            return synthgen.DgpKind(self.dataset['kind']).title
        return self.dataset.get('task', 'real')


@dataclass
class MethodOutcome:
    method: str
    run: int
    result: Optional[evaluation.RunResult] = None
    fit: Optional[object] = None
    error: str = ''


@dataclass
class ExperimentReport:
    table: evaluation.ExperimentTable
    results: List[evaluation.RunResult]
    outcomes: List[MethodOutcome] = field(default_factory=list)
    excluded_runs: List[int] = field(default_factory=list)
    run_keys: Optional[pd.DataFrame] = None


def _check_int(obj, key, minimum=1, where=''):
    if key in obj and (not isinstance(obj[key], int) or isinstance(obj[key], bool) or obj[key] < minimum):
        raise ValueError('{0}{1} must be an integer >= {2}'.format(where, key, minimum))


def _check_section(config_obj, key, cls):
    section = config_obj.get(key, {})
    if not isinstance(section, dict):
        raise ValueError('{0} must be a JSON object'.format(key))
    unknown = set(section) - set(cls.__dataclass_fields__)
    if unknown:
        raise ValueError('Unknown {0} settings: {1}'.format(key, ', '.join(sorted(unknown))))
    for name in cls.__dataclass_fields__:
        _check_int(section, name, 1, key + ' ')


def validate_config(config):
    '''
    Validate an experiment config given as a JSON string and return the
    normalised JSON string. Each method's own section is checked by that
    method's validate_config.
    '''
    if not config:
        raise ValueError('No config options set')
    config_obj = json.loads(config)
    if not isinstance(config_obj, dict):
        raise ValueError('Config must be a JSON object')

    if config_obj.get('experiment') not in ('synthetic', 'real'):
        raise ValueError('experiment must be "synthetic" or "real"')

    dataset = config_obj.get('dataset')
    if not isinstance(dataset, dict):
        raise ValueError('dataset must be set')
    if config_obj['experiment'] == 'synthetic':
        kinds = [k.value for k in synthgen.DgpKind]
        if dataset.get('kind') not in kinds:
            raise ValueError('dataset kind must be one of {0}'.format(', '.join(kinds)))
        _check_int(dataset, 'runs', 1, 'dataset ')
        _check_int(dataset, 'length', synthgen.AR_LAGS + 1, 'dataset ')
        if 'noise_sd' in dataset and not (isinstance(dataset['noise_sd'], (int, float)) and dataset['noise_sd'] > 0):
            raise ValueError('dataset noise_sd must be positive')
    else:
        if not dataset.get('csv'):
            raise ValueError('dataset csv must be set for real experiments')
        schema = dataset.get('schema')
        if not isinstance(schema, dict) or not schema.get('date') or not schema.get('values'):
            raise ValueError('dataset schema must name a date column and value columns')
        if dataset.get('task') not in TASKS:
            raise ValueError('dataset task must be one of {0}'.format(', '.join(TASKS)))
        _check_int(dataset, 'lags', 1, 'dataset ')
        if dataset['task'] == 'factor':
            factor_schema = dataset.get('factor_schema')
            needed = {'date', 'RF'} | set(ingest.FACTOR_COLUMNS)
            if not isinstance(factor_schema, dict) or not needed <= set(factor_schema):
                raise ValueError('factor task needs factor_schema with keys {0}'.format(', '.join(sorted(needed))))

    _check_section(config_obj, 'split', SplitConfig)
    _check_section(config_obj, 'cv', ExpandingCvSpec)

    methods = config_obj.get('methods')
    if not isinstance(methods, list) or not methods:
        raise ValueError('methods must be a non-empty list')
    known = registered_methods()
    seen = set()
    for entry in methods:
        if not isinstance(entry, dict) or entry.get('name') not in known:
            raise ValueError('Each method needs a name from: {0}'.format(', '.join(sorted(known))))
        if entry['name'] in seen:
            raise ValueError('Method {0} listed twice'.format(entry['name']))
        seen.add(entry['name'])
        settings = {k: v for k, v in entry.items() if k != 'name'}
        known[entry['name']]().validate_config(json.dumps(settings))

    grid = config_obj.get('ridge_grid', list(RIDGE_GRID))
    if not isinstance(grid, list) or not grid or \
            not all(isinstance(x, (int, float)) and np.isfinite(x) and x >= 0 for x in grid):
        raise ValueError('ridge_grid must be a non-empty list of nonnegative numbers')
    _check_int(config_obj, 'parallelism', 1)
    _check_int(config_obj, 'seed', 0)
    return json.dumps(config_obj, indent=1, sort_keys=True)


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        config = validate_config(f.read())
    return ExperimentConfig.from_dict(json.loads(config))


def expanding_folds(n, spec: ExpandingCvSpec) -> List[SplitSpec]:
    '''
    Walk-forward folds: train [1, k], validation (k, k+valid], test
    (k+valid, k+valid+test], with k advancing by step_days.
    '''
    needed = spec.initial_train_days + spec.valid_days + spec.test_days
    if n < needed:
        raise ingest.InsufficientDataError('Need at least {0} samples for one fold, got {1}'.format(needed, n))
    folds = []
    k = spec.initial_train_days
    while k + spec.valid_days + spec.test_days <= n:
        folds.append(SplitSpec(train_end=k, valid_end=k + spec.valid_days,
                               test_end=k + spec.valid_days + spec.test_days))
        k += spec.step_days
    return folds


def evaluate_method(method, dataset: Dataset, split: SplitSpec, ridge_grid, seed):
    '''
    Fit one method with its ridge penalty chosen by validation MSE (ties go
    to the smaller penalty) and score it on the test segment.

    :returns: (MethodFit, test MSE)
    '''
    if method.uses_ridge_grid:
        best = None
        last_error = None
        for penalty in sorted(ridge_grid):
            try:
                fit = method.fit_stage(dataset, split, SolverConfig(penalty), seed=seed)
            except (ArithmeticError, ValueError, RuntimeError) as e:
                log.debug('{0} failed with ridge penalty {1}: {2}'.format(method.name, penalty, e))
                last_error = e
                continue
            if best is None or fit.valid_mse < best.valid_mse:
                best = fit
        if best is None:
            raise last_error
        fit = best
    else:
        fit = method.fit_stage(dataset, split, None, seed=seed)

    _, y_test = dataset.test(split)
    return fit, evaluation.mse(method.predict_stage(fit, dataset, split), y_test)


def _run_unit(config: ExperimentConfig, run, dataset, split, seed):
    outcomes = []
    label = config.dataset_label
    for name, settings in config.methods:
        method = get_method(name, settings)
        try:
            fit, test_mse = evaluate_method(method, dataset, split, config.ridge_grid, seed)
        except (ArithmeticError, ValueError, RuntimeError) as e:
            log.warning('{0} failed on run {1}: {2}'.format(name, run, e))
            outcomes.append(MethodOutcome(method=name, run=run, error='{0}: {1}'.format(type(e).__name__, e)))
            continue
        outcomes.append(MethodOutcome(method=name, run=run, fit=fit,
                                      result=evaluation.RunResult(name, label, run, test_mse)))
    return outcomes


def _synthetic_unit(config: ExperimentConfig, run):
    seed = config.seed + run
    spec = synthgen.DgpSpec(kind=config.dataset['kind'],
                            length=config.dataset.get('length', synthgen.LENGTH),
                            noise_sd=config.dataset.get('noise_sd', synthgen.NOISE_SD))
    dataset = synthgen.to_supervised(synthgen.generate(spec, seed), name='{0}-{1}'.format(spec.kind.value, run))
    # split boundaries are raw series positions; the AR design drops the first lags
    split = make_split(dataset.length, config.split.train_end - synthgen.AR_LAGS,
                       config.split.valid_len, config.split.test_len)
    log.info('Run {0}: {1} seed {2}'.format(run, spec.kind.value, seed))
    return _run_unit(config, run, dataset, split, seed)


def _execute(config, func, units):
    n_jobs = thread_cap(config.parallelism)
    log.debug('Running {0} units on {1} worker(s)'.format(len(units), n_jobs))
    batches = Parallel(n_jobs=n_jobs)(delayed(func)(config, *unit) for unit in units)
    return [outcome for batch in batches for outcome in batch]


def _collect(config, outcomes, n_runs):
    failed = sorted({o.run for o in outcomes if o.error})
    if failed:
        log.warning('!!! {0} of {1} runs had method failures and are excluded for every method: {2}'
                    .format(len(failed), n_runs, failed))
    if len(failed) > MAX_FAILED_FRACTION * n_runs:
        raise ExperimentAbortedError('{0} of {1} runs failed (limit {2:.0%}); first error: {3}'
                                     .format(len(failed), n_runs, MAX_FAILED_FRACTION,
                                             next(o.error for o in outcomes if o.error)))
    results = [o.result for o in outcomes if o.result is not None and o.run not in set(failed)]
    return results, failed


def run_synthetic(config: ExperimentConfig) -> ExperimentReport:
    n_runs = int(config.dataset.get('runs', 192))
    log.info('Synthetic experiment {0}: {1} runs, methods {2}'
             .format(config.dataset_label, n_runs, [m for m, _ in config.methods]))
    outcomes = _execute(config, _synthetic_unit, [(run,) for run in range(n_runs)])
    results, failed = _collect(config, outcomes, n_runs)
    report = ExperimentReport(table=evaluation.build_table(results), results=results,
                              outcomes=outcomes, excluded_runs=failed)
    _write_artifacts(config, report)
    return report


def _load_factors(dataset_cfg):
    factor_schema = dataset_cfg['factor_schema']
    columns = {key: factor_schema[key] for key in ingest.FACTOR_COLUMNS + ('RF',)}
    frame = ingest.load_returns_csv(dataset_cfg.get('factors_csv', dataset_cfg['csv']),
                                    {'date': factor_schema['date'], 'values': list(columns.values())})
    return frame.rename(columns={v: k for k, v in columns.items()})


def real_datasets(dataset_cfg) -> List[Dataset]:
    '''
    One Dataset per series column, built for the configured task.
    '''
    frame = ingest.load_returns_csv(dataset_cfg['csv'], dataset_cfg['schema'])
    task = dataset_cfg['task']
    factors = _load_factors(dataset_cfg) if task == 'factor' else None
    datasets = []
    for column in frame.columns:
        series = frame[column]
        if task == 'factor':
            aligned = factors
            if series.index.isin(factors.index).all():
                aligned = factors.loc[series.index]
            datasets.append(ingest.build_factor_dataset(series, aligned[list(ingest.FACTOR_COLUMNS)],
                                                        aligned['RF'], name=column))
        else:
            transform = 'abs' if task == 'lag_volatility' else 'raw'
            lags = dataset_cfg.get('lags', DEFAULT_LAGS[task])
            datasets.append(ingest.build_lag_features(series, lags=lags, transform=transform, name=column))
    return datasets


def _cv_unit(config: ExperimentConfig, run, dataset, split):
    log.info('Run {0}: series {1}, train_end {2}'.format(run, dataset.name, split.train_end))
    return _run_unit(config, run, dataset, split, config.seed + run)


def run_expanding_cv(config: ExperimentConfig) -> ExperimentReport:
    datasets = real_datasets(config.dataset)
    units = []
    keys = []
    for dataset in datasets:
        for fold, split in enumerate(expanding_folds(dataset.length, config.cv)):
            run = len(units)
            units.append((run, dataset, split))
            keys.append({'run': run, 'series': dataset.name, 'fold': fold, 'train_end': split.train_end,
                         'valid_end': split.valid_end, 'test_end': split.test_end})
    log.info('Walk-forward experiment {0}: {1} series, {2} (series, fold) runs'
             .format(config.dataset_label, len(datasets), len(units)))

    outcomes = _execute(config, _cv_unit, units)
    results, failed = _collect(config, outcomes, len(units))
    table = evaluation.build_table(results)
    table.notes.append(evaluation.CORRELATION_CAVEAT)
    log.warning(evaluation.CORRELATION_CAVEAT)
    report = ExperimentReport(table=table, results=results, outcomes=outcomes, excluded_runs=failed,
                              run_keys=pd.DataFrame(keys, columns=['run', 'series', 'fold', 'train_end',
                                                                   'valid_end', 'test_end']))
    _write_artifacts(config, report)
    return report


def run(config: ExperimentConfig) -> ExperimentReport:
    if config.experiment == 'synthetic':
        return run_synthetic(config)
    return run_expanding_cv(config)


def _write_artifacts(config, report):
    if not config.output_dir:
        return
    outdir = config.output_dir
    for sub in ('traces', 'plotdata'):
        os.makedirs(os.path.join(outdir, sub), exist_ok=True)

    evaluation.write_table(report.table, os.path.join(outdir, 'table.csv'), os.path.join(outdir, 'table.txt'))
    evaluation.write_runs(report.results, os.path.join(outdir, 'runs.csv'))
    if report.run_keys is not None:
        report.run_keys.to_csv(os.path.join(outdir, 'run_keys.csv'), index=False)

    for outcome in sorted(report.outcomes, key=lambda o: (o.method, o.run)):
        fit = outcome.fit
        if fit is None:
            continue
        if fit.traces:
            pd.DataFrame({'restart': [t[0] for t in fit.traces], 'epoch': [t[1] for t in fit.traces],
                          'valid_loss': [format_float(t[2]) for t in fit.traces]}) \
                .to_csv(os.path.join(outdir, 'traces', '{0}_{1}.csv'.format(fit.method, outcome.run)), index=False)
        if fit.weight_curve is not None:
            weights = fit.weight_curve[:, 1]
            pd.DataFrame({'age': fit.weight_curve[:, 0].astype(np.int64),
                          'weight': [format_float(w) for w in weights],
                          'effective_sample_size': format_float(effective_sample_size(weights))}) \
                .to_csv(os.path.join(outdir, 'plotdata', 'weights_{0}_{1}.csv'.format(fit.method, outcome.run)),
                        index=False)
    log.info('Wrote results to {0}'.format(outdir))


class ExperimentAbortedError(RuntimeError):
    pass
