import hashlib
import logging
import os

log = logging.getLogger(__name__)

THREADS_ENV = 'FORGECAST_THREADS'


def derive_seed(seed, name):
    '''
    Deterministic sub-seed for `name` within run `seed`.

    Python's own hash() is salted per process, so the digest is taken
    with hashlib to keep worker processes in agreement.
    '''
    digest = hashlib.sha256('{0}:{1}'.format(int(seed), name).encode('utf-8')).hexdigest()
    return int(digest[:8], 16)


def thread_cap(requested):
    '''
    Worker count after applying the FORGECAST_THREADS cap.
    :param requested: parallelism degree from the experiment config
    :return: int >= 1
    '''
    requested = max(1, int(requested))
    value = os.environ.get(THREADS_ENV)
    if not value:
        return requested
    try:
        cap = int(value)
    except ValueError:
        log.warning('Ignoring non-integer {0}={1!r}'.format(THREADS_ENV, value))
        return requested
    return max(1, min(requested, cap))


def format_float(value):
    # 17 significant digits round-trip any double exactly
    return '{0:.17g}'.format(value)


def format_sci(value):
    return '{0:.2e}'.format(value)
