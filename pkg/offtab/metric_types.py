""" Module to hold the wrapper function for sweep metrics, the shared logger, and
    auxillary functions for dataset caching """
import os
import sys
import time
import hashlib
import inspect
import logging
from inspect import getfullargspec
import compress_pickle as pickle
import numpy as np
from .errors import ValidationError

# Get a universal logger to share with all modules.
logging.basicConfig(stream=sys.stderr, level=logging.DEBUG,
                    format="[%(levelname)s:%(module)s:%(funcName)s] %(message)s")
log = logging.getLogger('offtab')

# List all registered sweep metrics.
__metrics__ = []
def all_metrics():
    return __metrics__

def metric_names():
    return [m['name'] for m in __metrics__]

CACHE_COMPRESSIONS = ['gz', 'bz2', 'lzma', 'zip']


def _get_default_args(func):
    """ Get the default arguments for the function.

        Args:
            func: the function
        Returns:
            a dictionary with key value pairs for the default arguments
    """
    signature = inspect.signature(func)
    return {
        k: v.default
        for k, v in signature.parameters.items()
        if v.default is not inspect.Parameter.empty
    }


def sweep_metric(name, dependencies):
    """Registers a per-replicate metric computed by the sweep harness.

    The decorated function receives one replicate's context as keyword arguments
    and returns either a dict {'value': float, 'flag': str} or a list of such
    dicts. The wrapper checks the required parameters, fills defaults, times the
    call and tags every row with the metric name.

    Args:
        name (string): The metric name used in the CSV 'metric' column.
        dependencies (list): The offtab operations the metric is computed from.
            Metrics depending on 'sample_anchors' draw from the anchor oracle
            instead of an episode dataset.
        **kwargs:
            truth (TabularMDP): The data-generating MDP. Required.
            n (int): The episode count (or samples per anchor) of this grid point. Required.
            rng (RngStream): The replicate's stream for metric-level randomness. Required.

    Returns:
        A list of dicts with the fields metric, value, flag and elapsed (seconds).

    Raises:
        ValidationError: parameter `<name>` is required but missing.
    """
    def _wrapper1(func):
        def _wrapper2(*args, **kwargs):

            # Verify all required parameters for the metric function.
            params = [

                # These are universally required parameters for all metrics.
                'truth', 'n', 'rng',

                # These are the metric's required parameters after removing parameters
                # with provided default values, if any are provided.
                *getfullargspec(func)[0][:-len(getfullargspec(func)[3] or ()) or None]
            ]
            for param in params:
                if kwargs.get(param, None) is None:
                    raise ValidationError(param, f"parameter `{param}` is required but missing")

            log.info(f"Processing metric \"{name}\" at n={kwargs['n']}...")
            kwgs = _get_default_args(func)
            kwgs.update(kwargs)
            started = time.perf_counter()
            _result = func(*args, **kwgs)
            elapsed = time.perf_counter() - started
            if isinstance(_result, dict):
                _result = [_result]
            return [{'metric': row.get('metric', name),
                     'value': float(row['value']),
                     'flag': row.get('flag', ''),
                     'elapsed': elapsed} for row in _result]

        # When we register/save the function, make sure we
        # save the decorated and not the raw function.
        _wrapper2.__name__ = func.__name__
        _wrapper2.__doc__ = func.__doc__
        _wrapper2.__module__ = func.__module__
        __metrics__.append({'name': name,
                            'dependencies': dependencies,
                            'callable': _wrapper2})
        return _wrapper2
    return _wrapper1


def get_metric(name):
    """ Look up a registered metric by name. """
    for metric in __metrics__:
        if metric['name'] == name:
            return metric
    raise ValidationError('metrics', f"unknown metric `{name}`; choose from {metric_names()}")


## Cache ##

def cache_finder(cache_dir=None):
    """
    Helper function that finds the cache location
    """
    if cache_dir is not None:
        cache_dir = os.path.expanduser(cache_dir)
        assert os.path.exists(cache_dir), ("Caching directory (" + cache_dir +
                                ") specified as a keyword argument does not exist")
    elif os.getenv('OFFTAB_CACHE_DIR') is not None:
        cache_dir = os.path.expanduser(os.getenv('OFFTAB_CACHE_DIR'))
        assert os.path.exists(cache_dir), ("Caching directory (" + cache_dir +
                                ") found in environment variables does not exist")
    else:
        cache_dir = os.path.expanduser('~/.cache/offtab')
        if not os.path.exists(cache_dir):
            log.info("Creating default cache dir at ~/.cache/offtab")
            os.makedirs(cache_dir)
    return cache_dir


def dataset_key(mdp, mu, n, rng):
    """ Digest identifying a rolled dataset. """
    digest = hashlib.sha256()
    for arr in (mdp.P, mdp.r, mdp.d1, mu.probs):
        digest.update(np.ascontiguousarray(arr).tobytes())
    digest.update(f"{mdp.H}:{n}:{rng.base_seed}:{rng.stream_index}".encode())
    return digest.hexdigest()[:32]


def cached_rollout(roll, mdp, mu, n, rng, cache_dir=None):
    """ Finds and returns a cached dataset, rolling and saving it if absent.

    A compression method can be specified in the environment variable
    'OFFTAB_CACHE_COMPRESSION' (one of 'gz', 'bz2', 'lzma', 'zip').

    Args:
        roll (method): The dataset generator, called if no cached file matches.
        mdp (TabularMDP): The data-generating MDP.
        mu (Policy): The behavior policy.
        n (int): The number of episodes.
        rng (RngStream): The dataset stream.
        cache_dir (str): Optional cache directory (else OFFTAB_CACHE_DIR, else ~/.cache/offtab).

    Returns:
        An EpisodeDataset.
    """
    cache_dir = cache_finder(cache_dir)
    compression = os.getenv('OFFTAB_CACHE_COMPRESSION')
    if compression is not None and compression != 'none':
        assert compression in CACHE_COMPRESSIONS, (
            "Compression method for caching does not exist.")
    else:
        compression = None
    path = os.path.join(cache_dir, 'episodes_' + dataset_key(mdp, mu, n, rng) + '.offtab')
    if compression is not None:
        path += '.' + compression

    if os.path.exists(path):
        log.info("Using cached dataset %s...", path)
        return pickle.load(path, compression=compression, set_default_extension=False)

    log.info("No cached dataset found, rolling new...")
    data = roll(mdp, mu, n, rng)
    pickle.dump(data, path, compression=compression, set_default_extension=False)
    log.info("Saving dataset as %s...", path)
    return data
