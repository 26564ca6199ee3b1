'''Module exporting the package logger and a function to output a debug
string.'''

import logging

from typing import Any

LOG = logging.getLogger('islandf')

OUT_FUNC: Any = None


def out(*argv) -> None:
    '''Outputs the given arguments at debug level, and forwards them to
    OUT_FUNC when a hook is installed.'''
    if OUT_FUNC:
        OUT_FUNC(*argv)
    if LOG.isEnabledFor(logging.DEBUG):
        LOG.debug(' '.join(str(a) for a in argv))
