import io
import logging

import numpy as np
import pandas as pd
import requests

from forgecast.core import Dataset

log = logging.getLogger(__name__)

TRANSFORMS = {
    'abs': np.abs,
    'raw': lambda values: values,
}
FACTOR_COLUMNS = ('MR', 'SB', 'HL')


def _read_source(path):
    path = str(path)
    if path.startswith(('http://', 'https://')):
        log.debug('Fetching remote CSV {0}'.format(path))
        r = requests.get(path, timeout=60)
        if r.status_code != 200:
            raise IngestError('Could not fetch {0}: HTTP {1}'.format(path, r.status_code))
        return pd.read_csv(io.StringIO(r.text), dtype=str, keep_default_na=False)
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise IngestError('CSV file {0} does not exist'.format(path))


def _parse_column(raw, column, line_offset=2):
    '''
    Numeric column; blanks become NaN, anything else unparseable is an error
    naming its file line (header is line 1).
    '''
    stripped = raw[column].str.strip()
    values = pd.to_numeric(stripped.where(stripped != ''), errors='coerce')
    bad = values.isna() & (stripped != '')
    if bad.any():
        position = int(np.flatnonzero(bad.to_numpy())[0])
        raise IngestError('Unparseable value {0!r} in column {1!r} at line {2}'
                          .format(raw[column].iloc[position], column, position + line_offset))
    return values.astype(float)


def _select_top_by_volume(frame, volumes, top_n):
    average = volumes.mean(axis=0, skipna=True)
    keep = average.sort_values(ascending=False, kind='mergesort').index[:top_n]
    log.info('Keeping {0} of {1} series by average dollar volume'.format(len(keep), frame.shape[1]))
    return frame[[c for c in frame.columns if c in set(keep)]]


def load_returns_csv(path, schema) -> pd.DataFrame:
    '''
    Load date-aligned series from a CSV file or http(s) URL.

    :param schema: dict with `date` (column name), `values` (list of column
        names), optional `value_kind` ("returns" or "prices"), optional
        `volume_columns` (value column -> dollar volume column) with `top_n`
    :returns: DataFrame indexed by date, one column per series; gaps are
        forward-filled and rows before the first complete one dropped
    '''
    date_col = schema.get('date')
    value_cols = list(schema.get('values') or [])
    if not date_col or not value_cols:
        raise IngestError('Schema must name a date column and at least one value column')
    raw = _read_source(path)
    missing = [c for c in [date_col] + value_cols if c not in raw.columns]
    if missing:
        raise IngestError('Columns {0} not found in {1}'.format(missing, path))

    dates = pd.to_datetime(raw[date_col].str.strip(), errors='coerce')
    if dates.isna().any():
        position = int(np.flatnonzero(dates.isna().to_numpy())[0])
        raise IngestError('Unparseable date {0!r} at line {1}'.format(raw[date_col].iloc[position], position + 2))
    if not dates.is_monotonic_increasing or dates.duplicated().any():
        position = int(np.flatnonzero((dates.diff() <= pd.Timedelta(0)).to_numpy())[0])
        raise IngestError('Dates must be strictly increasing; line {0} ({1}) breaks the order'
                          .format(position + 2, raw[date_col].iloc[position]))

    frame = pd.DataFrame({c: _parse_column(raw, c) for c in value_cols})
    frame.index = pd.DatetimeIndex(dates, name=date_col)

    volume_cols = schema.get('volume_columns')
    if volume_cols:
        volumes = pd.DataFrame({c: _parse_column(raw, volume_cols[c]) for c in value_cols})
        volumes.index = frame.index
        frame = _select_top_by_volume(frame, volumes, int(schema.get('top_n', len(value_cols))))

    frame = frame.ffill().dropna(how='any')
    if schema.get('value_kind', 'returns') == 'prices':
        if (frame <= 0).any().any():
            raise IngestError('Prices must be positive to take log-returns')
        frame = np.log(frame).diff().iloc[1:]
    if frame.empty:
        raise IngestError('No complete rows left in {0} after forward-filling'.format(path))
    log.info('Loaded {0} series x {1} dates from {2}'.format(frame.shape[1], frame.shape[0], path))
    return frame


def build_lag_features(series, lags=5, transform='abs', name='') -> Dataset:
    '''
    Label f(Y_t) with features (f(Y_{t-1}), ..., f(Y_{t-lags})), no
    intercept, where f is the transform ("abs" or "raw").
    '''
    if transform not in TRANSFORMS:
        raise ValueError('Unknown transform {0!r}'.format(transform))
    index = series.index if isinstance(series, pd.Series) else None
    values = TRANSFORMS[transform](np.asarray(series, dtype=float))
    if lags < 1:
        raise ValueError('lags must be >= 1')
    if values.shape[0] <= lags:
        raise InsufficientDataError('Series of length {0} is too short for {1} lags'.format(values.shape[0], lags))
    n = values.shape[0] - lags
    features = np.column_stack([values[lags - k:lags - k + n] for k in range(1, lags + 1)])
    return Dataset(features=features, labels=values[lags:], name=name,
                   index=tuple(index[lags:]) if index is not None else None)


def build_factor_dataset(series: pd.Series, factors: pd.DataFrame, rf: pd.Series, name='') -> Dataset:
    '''
    Excess return regressed on (1, MR, SB, HL).
    '''
    series = pd.Series(series)
    factors = pd.DataFrame(factors)
    rf = pd.Series(rf)
    missing = [c for c in FACTOR_COLUMNS if c not in factors.columns]
    if missing:
        raise IngestError('Factor columns {0} are missing'.format(missing))
    for label, other in (('factors', factors.index), ('risk-free rate', rf.index)):
        if len(other) != len(series.index) or not (other == series.index).all():
            mismatch = _first_mismatch(series.index, other)
            raise IngestError('{0} not aligned with {1}: first mismatch at position {2} ({3})'
                              .format(label, name or 'series', mismatch[0], mismatch[1]))
    features = np.column_stack([np.ones(len(series))] + [factors[c].to_numpy(dtype=float) for c in FACTOR_COLUMNS])
    labels = series.to_numpy(dtype=float) - rf.to_numpy(dtype=float)
    return Dataset(features=features, labels=labels, name=name, index=tuple(series.index))


def _first_mismatch(left, right):
    for position, (a, b) in enumerate(zip(left, right)):
        if a != b:
            return position, '{0} != {1}'.format(a, b)
    position = min(len(left), len(right))
    return position, 'lengths {0} and {1}'.format(len(left), len(right))


class IngestError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass
