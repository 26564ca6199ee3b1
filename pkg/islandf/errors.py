'''Exceptions raised by islandf.

All of them derive from IslandError so that callers (typically the
command line entry point) can trap library failures in one place.
'''


class IslandError(Exception):
    '''Base class of all islandf errors.'''


class InvalidParameter(IslandError, ValueError):
    '''Signals a parameter outside of its validity range.'''


class InvalidInput(IslandError, ValueError):
    '''Signals an input violating the constraints of an operation, like
    a profile with the wrong volume.'''


class UndefinedGap(IslandError):
    '''Signals that the interpolation gap of a degenerate profile was
    requested.'''


class UndefinedRatio(IslandError):
    '''Signals a ratio with a vanishing denominator.'''


class EmptyFilm(IslandError):
    '''Signals that a profile has no column thick enough to be meshed.'''


class NotApplicable(IslandError):
    '''Signals a regime mismatch, like asking for island diagnostics on
    a wetting configuration.'''


class SolverFailure(IslandError):
    '''Signals that the linear solver did not converge.

    Attributes:
        iterations  Number of iterations performed.
        residual    Relative residual reached.
    '''
    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(
            f'{message} (iterations={iterations}, residual={residual:.3e})')
        self.iterations = iterations
        self.residual = residual
