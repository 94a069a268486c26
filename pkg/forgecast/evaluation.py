import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from forgecast.core import LossKind
from forgecast.helpers import format_float, format_sci

log = logging.getLogger(__name__)

EXACT_MAX_N = 20
SIGNIFICANCE = 0.05
CORRELATION_CAVEAT = ('Warning: the paired signed-rank test assumes independent runs; '
                      'series in real data are correlated, so stars are indicative only.')


@dataclass(frozen=True)
class RunResult:
    method: str
    dataset: str
    run: int
    test_mse: float

    def __post_init__(self):
        if not (np.isfinite(self.test_mse) and self.test_mse >= 0):
            raise ValueError('test_mse must be finite and >= 0, got {0}'.format(self.test_mse))


@dataclass
class TableCell:
    mean_mse: float
    n_runs: int
    p_value: float = 1.0
    starred: bool = False
    best: bool = False


@dataclass
class ExperimentTable:
    methods: List[str]
    datasets: List[str]
    cells: Dict[Tuple[str, str], TableCell] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def cell(self, method, dataset):
        return self.cells.get((method, dataset))

    def to_frame(self):
        rows = []
        for dataset in self.datasets:
            for method in self.methods:
                cell = self.cell(method, dataset)
                if cell is None:
                    continue
                rows.append({'dataset': dataset, 'method': method, 'mean_mse': format_float(cell.mean_mse),
                             'n_runs': cell.n_runs, 'p_value': format_float(cell.p_value),
                             'best': int(cell.best), 'starred': int(cell.starred)})
        return pd.DataFrame(rows, columns=['dataset', 'method', 'mean_mse', 'n_runs', 'p_value', 'best', 'starred'])

    def to_text(self):
        '''
        Aligned grid, methods by datasets; the best cell is bracketed and a
        trailing star marks a significantly larger MSE.
        '''
        header = ['method'] + list(self.datasets)
        lines = [header]
        for method in self.methods:
            row = [method]
            for dataset in self.datasets:
                cell = self.cell(method, dataset)
                if cell is None:
                    row.append('--')
                    continue
                text = format_sci(cell.mean_mse)
                if cell.best:
                    text = '[' + text + ']'
                row.append(text + ('*' if cell.starred else ''))
            lines.append(row)
        widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
        out = list(self.notes)
        for line in lines:
            out.append('  '.join(value.ljust(width) for value, width in zip(line, widths)).rstrip())
        return '\n'.join(out) + '\n'


def mse(predictions: Sequence[float], labels: Sequence[float]) -> float:
    predictions = np.asarray(predictions, dtype=float).reshape(-1)
    labels = np.asarray(labels, dtype=float).reshape(-1)
    if predictions.shape != labels.shape:
        raise ValueError('Length mismatch: {0} predictions, {1} labels'.format(predictions.size, labels.size))
    if predictions.size == 0:
        raise ValueError('Cannot compute the MSE of zero samples')
    return float(np.mean(LossKind.SQUARED_ERROR.loss(predictions, labels)))


def _exact_two_sided(ranks, w_plus):
    '''
    Two-sided p of W+ by counting all 2^n sign patterns. Ranks are doubled
    so midranks stay integral, and patterns are counted through the
    distribution of the signed sum rather than one by one.
    '''
    doubled = np.rint(2 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    observed = int(round(2 * w_plus))
    n_patterns = counts.sum()
    lower = counts[:observed + 1].sum() / n_patterns
    upper = counts[observed:].sum() / n_patterns
    return min(1.0, 2.0 * min(lower, upper))


def _normal_two_sided(ranks, w_plus):
    n = ranks.shape[0]
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    if var <= 0:
        return 1.0
    z = max(abs(w_plus - mean) - 0.5, 0.0) / np.sqrt(var)
    return float(min(1.0, 2.0 * stats.norm.sf(z)))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float], exact=None):
    '''
    Paired signed-rank test of a against b.

    Zero differences are dropped and ties share midranks. Up to
    EXACT_MAX_N nonzero differences the p-value is exact; above that the
    normal approximation with tie correction and continuity correction is
    used. `exact` forces one or the other.

    :returns: (W+, two-sided p-value)
    '''
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ValueError('Paired samples must be 1-D with equal nonzero length')
    d = a - b
    d = d[d != 0]
    if d.size == 0:
        return 0.0, 1.0

    ranks = stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if exact is None:
        exact = d.size <= EXACT_MAX_N
    if exact:
        return w_plus, _exact_two_sided(ranks, w_plus)
    return w_plus, _normal_two_sided(ranks, w_plus)


def _paired(results):
    grouped = defaultdict(dict)
    for r in results:
        key = (r.method, r.dataset)
        if r.run in grouped[key]:
            raise UnpairedRunsError('Duplicate run {0} for {1} on {2}'.format(r.run, r.method, r.dataset))
        grouped[key][r.run] = r.test_mse
    return grouped


def build_table(results: Sequence[RunResult], alpha: float = SIGNIFICANCE) -> ExperimentTable:
    '''
    Mean MSE per (method, dataset) with the best method per dataset marked
    and the others starred when their losses are significantly larger.
    '''
    grouped = _paired(results)
    methods = sorted({m for m, _ in grouped})
    datasets = sorted({d for _, d in grouped})
    table = ExperimentTable(methods=methods, datasets=datasets)

    for dataset in datasets:
        present = [m for m in methods if (m, dataset) in grouped]
        run_sets = {m: set(grouped[(m, dataset)]) for m in present}
        reference = set.union(*run_sets.values())
        offending = set()
        for m in present:
            offending |= reference - run_sets[m]
        if offending:
            raise UnpairedRunsError('Runs {0} of dataset {1} are not scored by every method'
                                    .format(sorted(offending), dataset))

        runs = sorted(reference)
        losses = {m: np.array([grouped[(m, dataset)][run] for run in runs]) for m in present}
        for m in present:
            table.cells[(m, dataset)] = TableCell(mean_mse=float(np.mean(losses[m])), n_runs=len(runs))

        # methods are sorted, so min() breaks ties by name
        best = min(present, key=lambda m: table.cells[(m, dataset)].mean_mse)
        table.cells[(best, dataset)].best = True
        for m in present:
            if m == best:
                continue
            cell = table.cells[(m, dataset)]
            _, cell.p_value = wilcoxon_signed_rank(losses[m], losses[best])
            cell.starred = cell.p_value < alpha and cell.mean_mse > table.cells[(best, dataset)].mean_mse
    return table


def runs_frame(results: Sequence[RunResult]) -> pd.DataFrame:
    rows = sorted(results, key=lambda r: (r.dataset, r.method, r.run))
    return pd.DataFrame({'method': [r.method for r in rows],
                         'dataset': [r.dataset for r in rows],
                         'run': [r.run for r in rows],
                         'mse': [format_float(r.test_mse) for r in rows]},
                        columns=['method', 'dataset', 'run', 'mse'])


def write_runs(results, path):
    runs_frame(results).to_csv(path, index=False)


def read_runs(path) -> List[RunResult]:
    frame = pd.read_csv(path, dtype={'method': str, 'dataset': str}, float_precision='round_trip')
    missing = {'method', 'dataset', 'run', 'mse'} - set(frame.columns)
    if missing:
        raise ValueError('{0} is missing columns: {1}'.format(path, ', '.join(sorted(missing))))
    return [RunResult(row.method, row.dataset, int(row.run), float(row.mse))
            for row in frame.itertuples(index=False)]


def write_table(table: ExperimentTable, csv_path, text_path=None):
    table.to_frame().to_csv(csv_path, index=False)
    if text_path is not None:
        with open(text_path, 'w') as f:
            f.write(table.to_text())


class UnpairedRunsError(ValueError):
    pass
