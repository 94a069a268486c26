import numpy as np
import pandas as pd
import pytest

from forgecast import ingest, ridge
from forgecast.core import SplitSpec


def _write(tmp_path, text, name='prices.csv'):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


SCHEMA = {'date': 'date', 'values': ['A', 'B']}


def test_load_three_rows(tmp_path):
    path = _write(tmp_path, 'date,A,B\n2020-01-02,0.01,0.02\n2020-01-03,-0.01,0.00\n2020-01-06,0.03,0.01\n')
    frame = ingest.load_returns_csv(path, SCHEMA)
    assert frame.shape == (3, 2)
    assert list(frame.columns) == ['A', 'B']
    np.testing.assert_allclose(frame['A'], [0.01, -0.01, 0.03])


def test_gap_is_forward_filled(tmp_path):
    path = _write(tmp_path, 'date,A,B\n2020-01-02,0.01,0.02\n2020-01-03,,0.05\n2020-01-06,0.03,0.01\n')
    frame = ingest.load_returns_csv(path, SCHEMA)
    assert frame['A'].iloc[1] == frame['A'].iloc[0]


def test_leading_gaps_are_dropped(tmp_path):
    path = _write(tmp_path, 'date,A,B\n2020-01-02,,0.02\n2020-01-03,0.01,0.05\n2020-01-06,0.03,0.01\n')
    frame = ingest.load_returns_csv(path, SCHEMA)
    assert len(frame) == 2
    assert frame.index[0] == pd.Timestamp('2020-01-03')


def test_shuffled_dates_rejected(tmp_path):
    path = _write(tmp_path, 'date,A,B\n2020-01-03,0.01,0.02\n2020-01-02,0.01,0.05\n')
    with pytest.raises(ingest.IngestError) as e:
        ingest.load_returns_csv(path, SCHEMA)
    assert 'line 3' in str(e.value)


def test_duplicate_dates_rejected(tmp_path):
    path = _write(tmp_path, 'date,A,B\n2020-01-02,0.01,0.02\n2020-01-02,0.01,0.05\n')
    with pytest.raises(ingest.IngestError):
        ingest.load_returns_csv(path, SCHEMA)


def test_unparseable_value_names_line(tmp_path):
    path = _write(tmp_path, 'date,A,B\n2020-01-02,0.01,0.02\n2020-01-03,abc,0.05\n')
    with pytest.raises(ingest.IngestError) as e:
        ingest.load_returns_csv(path, SCHEMA)
    assert 'line 3' in str(e.value)


def test_unparseable_date_names_line(tmp_path):
    path = _write(tmp_path, 'date,A,B\n2020-01-02,0.01,0.02\nnotadate,0.01,0.05\n')
    with pytest.raises(ingest.IngestError) as e:
        ingest.load_returns_csv(path, SCHEMA)
    assert 'line 3' in str(e.value)


def test_missing_file_and_columns(tmp_path):
    with pytest.raises(ingest.IngestError):
        ingest.load_returns_csv(str(tmp_path / 'nope.csv'), SCHEMA)
    path = _write(tmp_path, 'date,A\n2020-01-02,0.01\n')
    with pytest.raises(ingest.IngestError):
        ingest.load_returns_csv(path, SCHEMA)
    with pytest.raises(ingest.IngestError):
        ingest.load_returns_csv(path, {'date': 'date', 'values': []})


def test_prices_become_log_returns(tmp_path):
    path = _write(tmp_path, 'date,A\n2020-01-02,100\n2020-01-03,110\n2020-01-06,99\n')
    frame = ingest.load_returns_csv(path, {'date': 'date', 'values': ['A'], 'value_kind': 'prices'})
    np.testing.assert_allclose(frame['A'], [np.log(1.1), np.log(0.9)])


def test_top_n_by_dollar_volume(tmp_path):
    path = _write(tmp_path, 'date,A,B,C,vA,vB,vC\n'
                            '2020-01-02,0.01,0.02,0.03,5,50,10\n'
                            '2020-01-03,0.01,0.02,0.03,5,70,30\n')
    schema = {'date': 'date', 'values': ['A', 'B', 'C'],
              'volume_columns': {'A': 'vA', 'B': 'vB', 'C': 'vC'}, 'top_n': 2}
    frame = ingest.load_returns_csv(path, schema)
    assert list(frame.columns) == ['B', 'C']


def test_remote_csv(monkeypatch):
    class Response(object):
        status_code = 200
        text = 'date,A,B\n2020-01-02,0.01,0.02\n'

    calls = []

    def fake_get(url, timeout=None):
        calls.append(url)
        return Response()

    monkeypatch.setattr(ingest.requests, 'get', fake_get)
    frame = ingest.load_returns_csv('https://example.org/returns.csv', SCHEMA)
    assert calls == ['https://example.org/returns.csv']
    assert frame.shape == (1, 2)

    Response.status_code = 404
    with pytest.raises(ingest.IngestError):
        ingest.load_returns_csv('https://example.org/returns.csv', SCHEMA)


def test_lag_features_alternating_series():
    dataset = ingest.build_lag_features([1, -1, 1, -1, 1, -1, 1], lags=5)
    # labels |Y_t| for t = 6, 7
    assert dataset.length == 2
    assert np.all(dataset.features == 1.0)
    assert np.all(dataset.labels == 1.0)


def test_lag_features_examples():
    zero = ingest.build_lag_features(np.zeros(10), lags=5)
    assert np.all(zero.features == 0) and np.all(zero.labels == 0)

    dataset = ingest.build_lag_features([1, -2, 3], lags=1)
    np.testing.assert_array_equal(dataset.features, [[1], [2]])
    np.testing.assert_array_equal(dataset.labels, [2, 3])


def test_lag_features_keep_dates():
    index = pd.date_range('2020-01-01', periods=8, freq='D')
    dataset = ingest.build_lag_features(pd.Series(np.arange(8.0), index=index), lags=5)
    assert dataset.index[0] == index[5]


def test_lag_features_too_short():
    with pytest.raises(ingest.InsufficientDataError):
        ingest.build_lag_features([1.0, 2.0], lags=5)
    with pytest.raises(ValueError):
        ingest.build_lag_features([1.0, 2.0], lags=1, transform='log')


def _factor_frames(n=6, seed=0):
    index = pd.date_range('2021-03-01', periods=n, freq='B')
    rng = np.random.default_rng(seed)
    factors = pd.DataFrame(rng.normal(size=(n, 3)), index=index, columns=list(ingest.FACTOR_COLUMNS))
    rf = pd.Series(np.full(n, 1e-4), index=index)
    returns = pd.Series(rng.normal(size=n), index=index)
    return returns, factors, rf


def test_factor_dataset_layout():
    returns, factors, rf = _factor_frames()
    dataset = ingest.build_factor_dataset(returns, factors, rf, name='X')
    assert dataset.dim == 4
    assert np.all(dataset.features[:, 0] == 1.0)
    np.testing.assert_allclose(dataset.labels, returns - rf)


def test_factor_dataset_intercept_only():
    returns, factors, rf = _factor_frames()
    factors[:] = 0.0
    rf[:] = 0.0
    dataset = ingest.build_factor_dataset(returns, factors, rf)
    split = SplitSpec(4, 6, 6)
    weights = np.array([1.0, 2.0, 3.0, 4.0])
    solution = ridge.solve(dataset, split, weights, ridge.SolverConfig(1e-10))
    expected = np.sum(weights * returns.to_numpy()[:4]) / weights.sum()
    assert solution.theta[0] == pytest.approx(expected, rel=1e-8)


def test_factor_dataset_excess_returns_of_zero():
    returns, factors, rf = _factor_frames()
    dataset = ingest.build_factor_dataset(rf, factors, rf)
    solution = ridge.solve(dataset, SplitSpec(4, 6, 6), np.ones(4), ridge.SolverConfig(1e-3))
    assert np.all(dataset.labels == 0)
    assert np.all(solution.theta == 0)


def test_factor_dataset_two_sample_solve():
    index = pd.date_range('2021-03-01', periods=3, freq='B')
    factors = pd.DataFrame({'MR': [1.0, 2.0, 0.0], 'SB': [0.0, 0.0, 0.0], 'HL': [0.0, 0.0, 0.0]}, index=index)
    rf = pd.Series([0.0, 0.0, 0.0], index=index)
    returns = pd.Series([3.0, 5.0, 0.0], index=index)
    dataset = ingest.build_factor_dataset(returns, factors, rf)
    # y = 1 + 2 MR solves both training rows exactly; SB and HL are zero columns
    solution = ridge.solve(dataset, SplitSpec(2, 3, 3), np.ones(2), ridge.SolverConfig(1e-9))
    np.testing.assert_allclose(solution.theta, [1.0, 2.0, 0.0, 0.0], atol=1e-6)


def test_factor_dataset_misaligned():
    returns, factors, rf = _factor_frames()
    shifted = factors.copy()
    shifted.index = shifted.index[:3].append(shifted.index[3:] + pd.Timedelta(days=1))
    with pytest.raises(ingest.IngestError) as e:
        ingest.build_factor_dataset(returns, shifted, rf)
    assert 'position 3' in str(e.value)
    with pytest.raises(ingest.IngestError):
        ingest.build_factor_dataset(returns, factors.iloc[:-1], rf)
