import enum
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

# Ages and weights travel as plain 1-D numpy arrays, one entry per training
# sample in chronological order.
AgeVector = np.ndarray
WeightVector = np.ndarray


class LossKind(enum.Enum):
    SQUARED_ERROR = 'squared_error'

    def loss(self, predictions, labels):
        '''
        Elementwise loss L(y_hat, y).
        '''
        diff = np.asarray(predictions, dtype=float) - np.asarray(labels, dtype=float)
        return diff * diff


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    '''
    Aligned features X_t (T x d) and scalar labels Y_t (T,).

    Sample t of the documentation (1-based) lives at row t - 1.
    `index` optionally keeps the time labels the rows came from (dates for
    ingested data, raw series positions for synthetic data).
    '''
    features: np.ndarray
    labels: np.ndarray
    name: str = ''
    index: Optional[tuple] = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=float)

        if features.ndim != 2:
            raise DatasetError('Feature rows must all have the same dimension, got shape {0}'
                               .format(features.shape))
        if labels.ndim != 1:
            raise DatasetError('Labels must be scalars, got shape {0}'.format(labels.shape))
        if features.shape[0] != labels.shape[0]:
            raise DatasetError('Features and labels differ in length: {0} != {1}'
                               .format(features.shape[0], labels.shape[0]))
        if labels.shape[0] < 1 or features.shape[1] < 1:
            raise DatasetError('Dataset needs T >= 1 and d >= 1, got T={0}, d={1}'
                               .format(labels.shape[0], features.shape[1]))
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(labels))):
            raise DatasetError('Dataset {0!r} contains NaN or Inf entries'.format(self.name))
        if self.index is not None and len(self.index) != labels.shape[0]:
            raise DatasetError('Index length {0} does not match T={1}'
                               .format(len(self.index), labels.shape[0]))

        object.__setattr__(self, 'features', _frozen(features))
        object.__setattr__(self, 'labels', _frozen(labels))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], labels: Sequence[float], **kwargs):
        try:
            features = np.array([list(row) for row in rows], dtype=float)
        except ValueError as e:
            raise DatasetError('Ragged feature rows: {0}'.format(e))
        return cls(features=features, labels=labels, **kwargs)

    @property
    def length(self):
        return self.labels.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def train(self, split):
        s = split.train_slice
        return self.features[s], self.labels[s]

    def valid(self, split):
        s = split.valid_slice
        return self.features[s], self.labels[s]

    def test(self, split):
        s = split.test_slice
        return self.features[s], self.labels[s]


@dataclass(frozen=True)
class SplitSpec:
    '''
    Contiguous train / validation / test segments, all given as counts:
    train is samples 1..train_end, validation train_end+1..valid_end and
    test valid_end+1..test_end.
    '''
    train_end: int
    valid_end: int
    test_end: int

    def __post_init__(self):
        if not 1 <= self.train_end < self.valid_end <= self.test_end:
            raise BoundsError('Invalid split: need 1 <= train_end < valid_end <= test_end, got {0}'
                              .format(self))

    @property
    def valid_len(self):
        return self.valid_end - self.train_end

    @property
    def test_len(self):
        return self.test_end - self.valid_end

    @property
    def train_slice(self):
        return slice(0, self.train_end)

    @property
    def valid_slice(self):
        return slice(self.train_end, self.valid_end)

    @property
    def test_slice(self):
        return slice(self.valid_end, self.test_end)

    def check_fits(self, dataset: Dataset):
        if self.test_end > dataset.length:
            raise BoundsError('Split ends at {0} but dataset {1!r} has only {2} samples'
                              .format(self.test_end, dataset.name, dataset.length))


def make_split(total: int, train_end: int, valid_len: int, test_len: int) -> SplitSpec:
    '''
    Chronological split of `total` samples.

    :param total: number of samples T
    :param train_end: last training sample t*
    :param valid_len: validation segment length
    :param test_len: test segment length
    :returns: SplitSpec
    '''
    for name, value in (('train_end', train_end), ('valid_len', valid_len), ('test_len', test_len)):
        if int(value) != value or value < 1:
            raise BoundsError('{0} must be an integer >= 1, got {1}'.format(name, value))
    if train_end + valid_len + test_len > total:
        raise BoundsError('Split {0}+{1}+{2} exceeds the {3} available samples'
                          .format(train_end, valid_len, test_len, total))
    return SplitSpec(train_end=int(train_end),
                     valid_end=int(train_end + valid_len),
                     test_end=int(train_end + valid_len + test_len))


def ages_of(split: SplitSpec) -> AgeVector:
    '''
    Age t* - tau of each training sample tau, oldest first, ending in 0.
    '''
    return np.arange(split.train_end - 1, -1, -1, dtype=np.int64)


class BoundsError(ValueError):
    pass


class DatasetError(ValueError):
    pass


class DimensionError(ValueError):
    pass
