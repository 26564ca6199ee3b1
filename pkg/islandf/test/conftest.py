'''Pytest options of the islandf tests.'''

import pytest


def pytest_addoption(parser):
    '''Adds --runslow.'''
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the long acceptance tests')


def pytest_collection_modifyitems(config, items):
    '''Skips tests marked slow unless --runslow is given.'''
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)
