'''Unit tests for types'''

import numpy as np
import pytest

from .. import enums
from .. import errors
from ..types import Resolution


def test_resolution_defaults():
    '''Test default mesh and solver control'''
    res = Resolution()
    assert res.cells == 256
    assert res.layers == 24
    assert res.backend == enums.SolverBackend.CG


def test_layer_fractions():
    '''Test graded layer heights'''
    s = Resolution(layers=4).layer_fractions()
    np.testing.assert_allclose(s, [0.0, 1 / 16, 1 / 4, 9 / 16, 1.0])
    s = Resolution(layers=4, grading=1.0).layer_fractions()
    np.testing.assert_allclose(s, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_resolution_validation():
    '''Test invalid mesh and solver control'''
    for kwargs in ({'cells': 1}, {'layers': 0}, {'grading': 0.5},
                   {'tol': 0.0}, {'max_iter': 0}):
        with pytest.raises(errors.InvalidParameter):
            Resolution(**kwargs)
