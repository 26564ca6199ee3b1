'''Module holding general utilities'''

import os

from multiprocessing import Pool
from typing import Callable
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence

import numpy as np

from . import errors
from .debug import LOG


def default_jobs() -> int:
    '''Returns the number of available cores.'''
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def run_jobs(func: Callable, items: Sequence,
             jobs: Optional[int] = None) -> List:
    '''Applies func to every item, in a pool of worker processes when
    jobs > 1. Results keep the order of items whatever the completion
    order. func must be picklable (a module level function or a
    functools.partial of one).'''
    items = list(items)
    if jobs is None:
        jobs = default_jobs()
    if jobs < 1:
        raise errors.InvalidParameter('jobs must be at least 1')
    jobs = min(jobs, len(items))
    if jobs <= 1:
        return [func(item) for item in items]
    LOG.info('running %d jobs on %d workers', len(items), jobs)
    with Pool(jobs) as pool:
        results = pool.map(func, items)
        pool.close()
        pool.join()
    return results


class LogLogFit(NamedTuple):
    '''Fit of log y = slope log x + intercept.'''
    slope: float
    intercept: float
    count: int


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    '''Returns the least-squares line through (log x, log y).'''
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or len(x) < 2:
        raise errors.InvalidInput('log-log fit needs at least two points')
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise errors.InvalidInput('log-log fit needs positive values')
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return LogLogFit(float(slope), float(intercept), len(x))
