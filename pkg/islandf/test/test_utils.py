'''Unit tests for utils'''

import pytest

from .. import errors
from .. import utils


def _square(x):
    return x * x


def test_run_jobs_serial():
    '''Test serial jobs keep the order of items'''
    assert utils.run_jobs(_square, [3, 1, 2], jobs=1) == [9, 1, 4]
    assert not utils.run_jobs(_square, [], jobs=4)
    with pytest.raises(errors.InvalidParameter):
        utils.run_jobs(_square, [1], jobs=0)


def test_run_jobs_pool():
    '''Test pooled jobs keep the order of items'''
    assert utils.run_jobs(abs, [-3, 1, -2, 5], jobs=2) == [3, 1, 2, 5]


def test_default_jobs():
    '''Test at least one worker is available'''
    assert utils.default_jobs() >= 1


def test_loglog_fit():
    '''Test slope and intercept of a power law'''
    fit = utils.loglog_fit([1.0, 10.0, 100.0], [3.0, 3.0 * 10 ** 0.8,
                                                3.0 * 100 ** 0.8])
    assert fit.slope == pytest.approx(0.8)
    assert fit.intercept == pytest.approx(1.0986122886681098)
    assert fit.count == 3
    with pytest.raises(errors.InvalidInput):
        utils.loglog_fit([1.0], [1.0])
    with pytest.raises(errors.InvalidInput):
        utils.loglog_fit([1.0, 2.0], [1.0, 0.0])
