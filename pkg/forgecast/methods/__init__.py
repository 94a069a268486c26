import logging

from forgecast.methods.base import ForecastMethod, MethodFit
from forgecast.methods.gradient import GradExpMethod, GradMixedDecayMethod
from forgecast.methods.grid_exp import GridSearchExpMethod
from forgecast.methods.state_space import StateSpaceMethod
from forgecast.methods.stationary import StationaryMethod
from forgecast.methods.window import WindowMethod

log = logging.getLogger(__name__)

ENTRY_POINT_GROUP = 'forgecast.methods'

BUILTIN_METHODS = {
    'stationary': StationaryMethod,
    'window': WindowMethod,
    'grid_search_exp': GridSearchExpMethod,
    'state_space': StateSpaceMethod,
    'grad_exp': GradExpMethod,
    'grad_mixed_decay': GradMixedDecayMethod,
}


def _entry_points():
    try:
        from importlib.metadata import entry_points
    except ImportError:
        return []
    found = entry_points()
    if hasattr(found, 'select'):
        return list(found.select(group=ENTRY_POINT_GROUP))
    return list(found.get(ENTRY_POINT_GROUP, []))


def registered_methods():
    '''
    Name -> method class, built-ins plus anything installed under the
    `forgecast.methods` entry point group.
    '''
    methods = dict(BUILTIN_METHODS)
    for ep in _entry_points():
        if ep.name in methods:
            continue
        try:
            methods[ep.name] = ep.load()
        except Exception as e:
            log.error('Could not load method plugin {0}: {1}'.format(ep.name, e))
    return methods


def get_method(name, config=None):
    methods = registered_methods()
    if name not in methods:
        raise ValueError('Unknown method {0!r}, expected one of {1}'.format(name, ', '.join(sorted(methods))))
    method = methods[name]()
    method._set_config(config)
    return method
