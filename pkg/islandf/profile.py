'''Height profiles of a film on a computational window.

A profile is a nonnegative piecewise-linear function sampled on the nodes
of a uniform grid, vanishing at both ends of the window. All integrals
are exact for the interpolant: the volume is the trapezoid sum and the
surface energies are evaluated cell by cell with closed-form formulas.
This is what makes the rescaling identities hold to rounding error.

Main entry points:
- Grid1D, Profile, SurfaceEnergyKind: the value types.
- volume(), surface_energy(), sup_norm(), interpolation_gap(): measures.
- rescale_isotropic(), rescale_anisotropic(), rescale_physical(): the
  exact rescaling maps of the energy.
- tent(), parabola(), flat_layer(), box(), extremizer(): builders.
- write_csv(), read_csv(): serialization with header `x,h`.
'''

import math

from dataclasses import dataclass
from typing import Callable
from typing import Tuple

import numpy as np

from . import enums
from . import errors
from .types import Array

# Heights below FLOOR_FACTOR * max h are treated as void.
FLOOR_FACTOR = 1e-6

INTERPOLATION_CONSTANT = (9.0 / 16.0) ** (1.0 / 3.0)


@dataclass(frozen=True)
class Grid1D:
    '''Uniform grid of the window [x_min, x_max] with n_cells cells.'''
    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise errors.InvalidParameter('window bounds must be finite')
        if self.x_min >= self.x_max:
            raise errors.InvalidParameter('x_min must be less than x_max')
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise errors.InvalidParameter('n_cells must be an integer >= 2')

    @classmethod
    def centered(cls, width: float, n_cells: int) -> 'Grid1D':
        '''Returns the grid of the window [-width/2, width/2].'''
        if not width > 0.0:
            raise errors.InvalidParameter('window width must be positive')
        return cls(-0.5 * width, 0.5 * width, n_cells)

    @property
    def length(self) -> float:
        '''Length of the window.'''
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        '''Grid spacing.'''
        return self.length / self.n_cells

    @property
    def n_nodes(self) -> int:
        '''Number of nodes.'''
        return self.n_cells + 1

    def nodes(self) -> Array:
        '''Returns the node abscissae.'''
        return np.linspace(self.x_min, self.x_max, self.n_nodes)


@dataclass(frozen=True)
class SurfaceEnergyKind:
    '''Surface energy approximation, with the smoothing parameter of the
    large-slope total variation. eps_tv is a slope scale: the smoothed
    density is sqrt(h'^2 + eps_tv^2) - eps_tv.'''
    tag: enums.SurfaceTag
    eps_tv: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.eps_tv) and self.eps_tv >= 0.0):
            raise errors.InvalidParameter('eps_tv must be finite and >= 0')

    def __str__(self):
        return str(self.tag)

    def reporting(self) -> 'SurfaceEnergyKind':
        '''Returns the unsmoothed kind used to report energies.'''
        return SurfaceEnergyKind(self.tag)

    def smoothed(self, eps_tv: float) -> 'SurfaceEnergyKind':
        '''Returns the same kind with another smoothing parameter.'''
        return SurfaceEnergyKind(self.tag, eps_tv)

    @classmethod
    def from_str(cls, text: str, eps_tv: float = 0.0) -> 'SurfaceEnergyKind':
        '''Parses the command line spelling of a kind.'''
        try:
            return cls(enums.SurfaceTag.from_str(text), eps_tv)
        except ValueError as ex:
            raise errors.InvalidParameter(str(ex)) from ex


SMALL_SLOPE = SurfaceEnergyKind(enums.SurfaceTag.SMALL_SLOPE)
LARGE_SLOPE = SurfaceEnergyKind(enums.SurfaceTag.LARGE_SLOPE)
EXACT = SurfaceEnergyKind(enums.SurfaceTag.EXACT)


@dataclass(frozen=True, eq=False)
class Profile:
    '''Nonnegative piecewise-linear height profile. Heights are copied at
    construction and made read-only so profiles can be shared between
    workers.

    Attributes:
        grid     Window and its discretization.
        heights  Height at each node, zero at both window ends.
    '''
    grid: Grid1D
    heights: Array

    def __post_init__(self):
        h = np.array(self.heights, dtype=float)
        if h.shape != (self.grid.n_nodes,):
            raise errors.InvalidInput(
                f'expected {self.grid.n_nodes} heights, got {h.shape}')
        if not np.all(np.isfinite(h)):
            raise errors.InvalidInput('heights must be finite')
        if np.any(h < 0.0):
            raise errors.InvalidInput('heights must be nonnegative')
        if h[0] != 0.0 or h[-1] != 0.0:
            raise errors.InvalidInput('heights must vanish at window ends')
        h.flags.writeable = False
        object.__setattr__(self, 'heights', h)

    @property
    def x(self) -> Array:
        '''Node abscissae.'''
        return self.grid.nodes()

    def with_heights(self, heights) -> 'Profile':
        '''Returns a profile on the same grid with other heights.'''
        return Profile(self.grid, heights)

    def floor(self) -> float:
        '''Returns the height below which columns are void.'''
        return FLOOR_FACTOR * float(self.heights.max())

    def support_mask(self) -> Array:
        '''Returns the mask of nodes above the floor.'''
        if not self.heights.any():
            return np.zeros(self.grid.n_nodes, dtype=bool)
        return self.heights > self.floor()


def zero(grid: Grid1D) -> Profile:
    '''Returns the empty film.'''
    return Profile(grid, np.zeros(grid.n_nodes))


def volume(p: Profile) -> float:
    '''Returns the exact integral of the interpolant (trapezoid sum).'''
    h = p.heights
    return 0.5 * p.grid.dx * float(np.sum(h[:-1] + h[1:]))


def cell_energies(p: Profile, kind: SurfaceEnergyKind) -> Array:
    '''Returns the surface energy carried by each cell.'''
    dh = np.diff(p.heights)
    dx = p.grid.dx
    if kind.tag == enums.SurfaceTag.SMALL_SLOPE:
        return dh * dh / dx
    if kind.tag == enums.SurfaceTag.LARGE_SLOPE:
        if kind.eps_tv > 0.0:
            edx = kind.eps_tv * dx
            # sqrt(dh^2 + edx^2) - edx without cancellation
            return dh * dh / (np.sqrt(dh * dh + edx * edx) + edx)
        return np.abs(dh)
    assert kind.tag == enums.SurfaceTag.EXACT
    return dh * dh / (np.hypot(dx, dh) + dx)


def surface_energy(p: Profile, kind: SurfaceEnergyKind) -> float:
    '''Returns the discrete surface energy of the given kind.'''
    return max(float(np.sum(cell_energies(p, kind))), 0.0)


def surface_weights(p: Profile, kind: SurfaceEnergyKind) -> Array:
    '''Returns per-cell weights w such that the gradient of the surface
    energy with respect to the heights is D^T (w D h), D being the forward
    difference. The weights are constant for the small-slope energy and
    lagged (frozen at p) otherwise.'''
    dh = np.diff(p.heights)
    dx = p.grid.dx
    if kind.tag == enums.SurfaceTag.SMALL_SLOPE:
        return np.full(p.grid.n_cells, 2.0 / dx)
    if kind.tag == enums.SurfaceTag.LARGE_SLOPE:
        if kind.eps_tv <= 0.0:
            raise errors.InvalidParameter(
                'total variation is not differentiable without smoothing')
        edx = kind.eps_tv * dx
        return 1.0 / np.sqrt(dh * dh + edx * edx)
    assert kind.tag == enums.SurfaceTag.EXACT
    return 1.0 / np.hypot(dx, dh)


def apply_difference_form(weights: Array, heights: Array) -> Array:
    '''Returns D^T (weights D heights).'''
    flux = weights * np.diff(heights)
    out = np.zeros_like(heights)
    out[:-1] -= flux
    out[1:] += flux
    return out


def surface_gradient(p: Profile, kind: SurfaceEnergyKind) -> Array:
    '''Returns the derivative of surface_energy with respect to each nodal
    height. Dividing by dx gives the L2 gradient, -2h'' for the small-slope
    energy.'''
    return apply_difference_form(surface_weights(p, kind), p.heights)


def max_slope(p: Profile) -> float:
    '''Returns the largest cell slope in absolute value.'''
    return float(np.max(np.abs(np.diff(p.heights)))) / p.grid.dx


def total_variation(p: Profile) -> float:
    '''Returns the total variation of the profile.'''
    return float(np.sum(np.abs(np.diff(p.heights))))


def sup_norm(p: Profile) -> float:
    '''Returns the maximal height.'''
    return float(p.heights.max())


def interpolation_gap(p: Profile) -> float:
    '''Returns (9/16)^(1/3) V^(1/3) S^(1/3) - sup h, with the small-slope
    energy S. The gap is nonnegative for every profile since the
    interpolant is an admissible continuum function.'''
    vol = volume(p)
    surf = surface_energy(p, SMALL_SLOPE)
    if vol <= 0.0 or surf <= 0.0:
        raise errors.UndefinedGap('interpolation gap of an empty profile')
    return INTERPOLATION_CONSTANT * (vol * surf) ** (1.0 / 3.0) - sup_norm(p)


def tv_sup_gap(p: Profile) -> float:
    '''Returns TV/2 - sup h, nonnegative for compactly supported profiles
    (the large-slope bound of the height by the surface energy).'''
    return 0.5 * total_variation(p) - sup_norm(p)


def _check_factor(lam: float) -> None:
    if not (math.isfinite(lam) and lam > 0.0):
        raise errors.InvalidParameter('rescaling factor must be positive')


def rescale_isotropic(p: Profile, lam: float) -> Profile:
    '''Returns h_lam(x) = h(lam x) / lam on the rescaled window. Volume is
    divided by lam^2 and both surface energies by lam.'''
    _check_factor(lam)
    g = p.grid
    grid = Grid1D(g.x_min / lam, g.x_max / lam, g.n_cells)
    return Profile(grid, p.heights / lam)


def rescale_anisotropic(p: Profile, lam: float) -> Profile:
    '''Returns h_lam(x) = lam h(lam x) on the rescaled window. Volume is
    preserved, the small-slope energy is multiplied by lam^3 and the total
    variation by lam.'''
    _check_factor(lam)
    g = p.grid
    grid = Grid1D(g.x_min / lam, g.x_max / lam, g.n_cells)
    return Profile(grid, p.heights * lam)


def rescale_affine(p: Profile, x_factor: float, h_factor: float) -> Profile:
    '''Returns x -> h_factor h(x_factor x) on the rescaled window.'''
    _check_factor(x_factor)
    _check_factor(h_factor)
    g = p.grid
    grid = Grid1D(g.x_min / x_factor, g.x_max / x_factor, g.n_cells)
    return Profile(grid, p.heights * h_factor)


def rescale_physical(e0: float, d: float) -> Tuple[float, float]:
    '''Eliminates the misfit amplitude e0 from a problem of volume d:
    returns (V, factor) with V = e0^4 d and F(e0, d) = factor * F(V).'''
    if not (math.isfinite(e0) and e0 > 0.0):
        raise errors.InvalidParameter('e0 must be positive')
    if not (math.isfinite(d) and d > 0.0):
        raise errors.InvalidParameter('d must be positive')
    return e0 ** 4 * d, 1.0 / e0 ** 2


def from_function(grid: Grid1D, func: Callable[[Array], Array]) -> Profile:
    '''Samples func at the nodes; negative values are clipped and the
    window ends are set to zero.'''
    h = np.maximum(np.asarray(func(grid.nodes()), dtype=float), 0.0)
    h[0] = 0.0
    h[-1] = 0.0
    return Profile(grid, h)


def normalized(p: Profile, vol: float) -> Profile:
    '''Returns the profile scaled vertically to the given volume.'''
    current = volume(p)
    if current <= 0.0:
        raise errors.InvalidParameter(
            'cannot normalize a profile without volume (support smaller '
            'than the grid spacing?)')
    return p.with_heights(p.heights * (vol / current))


def tent(grid: Grid1D, vol: float, half_width: float,
         center: float = 0.0) -> Profile:
    '''Returns the symmetric tent of the given half width and volume.'''
    return normalized(from_function(
        grid, lambda x: 1.0 - np.abs(x - center) / half_width), vol)


def parabola(grid: Grid1D, vol: float, half_width: float,
             center: float = 0.0) -> Profile:
    '''Returns the parabola cap vanishing at center +/- half_width,
    scaled to the given volume.'''
    return normalized(from_function(
        grid, lambda x: half_width ** 2 - (x - center) ** 2), vol)


def flat_layer(grid: Grid1D, vol: float) -> Profile:
    '''Returns a layer of constant height over the whole window, dropping
    to zero in the two end cells.'''
    h = np.ones(grid.n_nodes)
    h[0] = 0.0
    h[-1] = 0.0
    return normalized(Profile(grid, h), vol)


def box(grid: Grid1D, vol: float, width: float,
        center: float = 0.0) -> Profile:
    '''Returns a plateau over [center - width/2, center + width/2] with
    one-cell ramps, scaled to the given volume.'''
    x = grid.nodes()
    h = np.where(np.abs(x - center) <= 0.5 * width + 1e-12 * grid.length,
                 1.0, 0.0)
    h[0] = 0.0
    h[-1] = 0.0
    return normalized(Profile(grid, h), vol)


def extremizer(grid: Grid1D) -> Profile:
    '''Returns g(x) = (1 - |x|/1.5)^2 on [-1.5, 1.5], the profile for which
    the interpolation inequality is an equality (unit volume, small-slope
    energy 16/9).'''
    return from_function(grid, lambda x: np.maximum(
        1.0 - np.abs(x) / 1.5, 0.0) ** 2)


def write_csv(p: Profile, path) -> None:
    '''Writes the profile as CSV with header `x,h`.'''
    np.savetxt(path, np.column_stack([p.x, p.heights]), delimiter=',',
               header='x,h', comments='', fmt='%.17g')


def read_csv(path) -> Profile:
    '''Reads a profile written by write_csv().'''
    try:
        data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    except ValueError as ex:
        raise errors.InvalidInput(f'{path}: {ex}') from ex
    if data.shape[1] != 2 or data.shape[0] < 3:
        raise errors.InvalidInput(f'{path}: expected columns x,h')
    x = data[:, 0]
    grid = Grid1D(float(x[0]), float(x[-1]), len(x) - 1)
    if not np.allclose(x, grid.nodes(), rtol=0.0, atol=1e-9 * grid.length):
        raise errors.InvalidInput(f'{path}: nodes are not uniform')
    return Profile(grid, data[:, 1])
