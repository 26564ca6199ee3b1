'''Provides enum helper and enums for the package.'''

from enum import auto
from enum import Enum


class AutoEnum(Enum):
    '''Base class for enums whose members carry a description, which is
    also the text used on the command line and in result files.'''
    def __new__(cls, description):
        value = len(cls.__members__)
        obj = object.__new__(cls)
        obj._value_ = value
        obj._description = description
        return obj

    def __str__(self):
        return f'{self._description}'

    @classmethod
    def from_int(cls, i):
        '''Returns the enum member associated with the given integer.'''
        for member in cls:
            if member.value == i:
                return member
        raise ValueError('Unsupported enum value')

    @classmethod
    def from_str(cls, text: str):
        '''Returns the enum member whose description is the given text.'''
        for member in cls:
            if str(member) == text:
                return member
        raise ValueError(f'Unsupported {cls.__name__} "{text}"')

    @classmethod
    def choices(cls):
        '''Returns the descriptions of all members.'''
        return [str(m) for m in cls]


class SurfaceTag(AutoEnum):
    '''Surface energy approximations.'''
    SMALL_SLOPE = 'small-slope'
    LARGE_SLOPE = 'large-slope'
    EXACT = 'exact'


class VolumeMode(AutoEnum):
    '''How the optimizer enforces the volume constraint.'''
    PROJECTION = 'projection'
    PENALTY = 'penalty'


class StepScheme(AutoEnum):
    '''Time discretization of the gradient flow.'''
    SEMI_IMPLICIT = 'semi-implicit'
    EXPLICIT = 'explicit'


class SolverBackend(AutoEnum):
    '''Linear solvers for the elastic problem.'''
    CG = 'cg'
    DIRECT = 'direct'


class ConstructionKind(AutoEnum):
    '''Closed-form three dimensional competitors.'''
    THIN_LAYER = 'thin-layer'
    PYRAMID = 'pyramid'
    BOX_LARGE_SLOPE = 'box-large-slope'


class LimitKind(AutoEnum):
    '''Minimizers of the reduced asymptotic functionals.'''
    PARABOLA = 'parabola'
    RECTANGLE = 'rectangle'


class Command(Enum):
    '''Commands supported by the command line entry point.'''
    SOLVE = auto()
    SWEEP = auto()
    CORRECTOR = auto()
    LIMIT = auto()
    VERIFY = auto()
