'''Module exporting basic types'''

from dataclasses import dataclass

import numpy as np

from . import enums
from . import errors

Array = np.ndarray


@dataclass(frozen=True)
class Resolution:
    '''Mesh and linear solver control of elastic computations.

    Attributes:
        cells    Number of cells along x for rectangular strips (profile
                 computations use the grid of the profile).
        layers   Number of element layers in every column.
        grading  Exponent of the layer distribution y = h (k/layers)^grading,
                 larger values concentrate layers near the substrate.
        backend  Linear solver.
        tol      Relative residual requested from the linear solver.
        max_iter Iteration cap of the iterative solver.
    '''
    cells: int = 256
    layers: int = 24
    grading: float = 2.0
    backend: enums.SolverBackend = enums.SolverBackend.CG
    tol: float = 1e-12
    max_iter: int = 50000

    def __post_init__(self):
        if self.cells < 2:
            raise errors.InvalidParameter('cells must be at least 2')
        if self.layers < 1:
            raise errors.InvalidParameter('layers must be at least 1')
        if self.grading < 1.0:
            raise errors.InvalidParameter('grading must be at least 1')
        if self.tol <= 0.0:
            raise errors.InvalidParameter('tol must be positive')
        if self.max_iter < 1:
            raise errors.InvalidParameter('max_iter must be positive')

    def layer_fractions(self) -> Array:
        '''Returns the relative heights s_k in [0, 1] of the fibre nodes.'''
        k = np.arange(self.layers + 1, dtype=float)
        return (k / self.layers) ** self.grading
