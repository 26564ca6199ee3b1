'''Large-volume limits of the minimizers.

After rescaling to unit volume, minimizers converge to the minimizers of a
reduced energy in which the elastic term only sees the lengths of the
islands:

    G(h) = C_W sum_i (b_i - a_i)^2 + S(h)

with S the surface energy of the regime. Its minimizer is a single
parabola cap for the small-slope energy and a single rectangle for the
total variation. This module has the closed forms, the rescaling of
computed minimizers, the distances to the limit (both to the global
limit shape and to the comparator constrained on a level set) and the two
stability inequalities that control these distances.
'''

import math

from dataclasses import dataclass
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from . import elastic
from . import enums
from . import errors
from . import optimizer
from . import profile
from . import segments
from . import storage
from .types import Array

VOLUME_TOLERANCE = 1e-6
LEVEL = 0.1
CONVERGENCE_CSV_HEADER = \
    'V,distance_constrained,distance_global,rate_abscissa'

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)
_GAUSS5_X, _GAUSS5_W = np.polynomial.legendre.leggauss(5)


def limit_kind(kind: profile.SurfaceEnergyKind) -> enums.LimitKind:
    '''Returns the limit shape of the given surface energy.'''
    if kind.tag == enums.SurfaceTag.SMALL_SLOPE:
        return enums.LimitKind.PARABOLA
    if kind.tag == enums.SurfaceTag.LARGE_SLOPE:
        return enums.LimitKind.RECTANGLE
    raise errors.NotApplicable(f'no limit shape for {kind}')


def _exponents(
        kind: profile.SurfaceEnergyKind) -> Tuple[float, float, float]:
    '''Returns the exponents (a, b, c) of the rescaling
    x -> V^-b h(V^a x) of the regime and of its energy V^-c (E + S).'''
    if limit_kind(kind) == enums.LimitKind.PARABOLA:
        return 0.4, 0.6, 0.8
    return 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0


def parabola_energy(half_width: float, c_w: float) -> float:
    '''Returns G of the unit-volume parabola cap of the given half
    width: 4 C_W l^2 + 3 / (2 l^3).'''
    return 4.0 * c_w * half_width ** 2 + 1.5 / half_width ** 3


def rectangle_energy(base: float, c_w: float) -> float:
    '''Returns G of the unit-volume rectangle of the given base:
    C_W b^2 + 2 / b.'''
    return c_w * base ** 2 + 2.0 / base


@dataclass(frozen=True)
class LimitShape:
    '''Unit-volume minimizer of the reduced energy.

    Attributes:
        kind            Parabola or rectangle.
        ell             Half width of the parabola, base of the rectangle.
        c_w             Corrector constant used.
        energy          Reduced energy of the shape.
        elastic_energy  Its elastic part C_W (support length)^2.
    '''
    kind: enums.LimitKind
    ell: float
    c_w: float
    energy: float
    elastic_energy: float

    @property
    def support_length(self) -> float:
        '''Length of the support.'''
        if self.kind == enums.LimitKind.PARABOLA:
            return 2.0 * self.ell
        return self.ell

    @property
    def height(self) -> float:
        '''Maximal height.'''
        if self.kind == enums.LimitKind.PARABOLA:
            return 0.75 / self.ell
        return 1.0 / self.ell

    @property
    def multiplier(self) -> float:
        '''Returns lambda = -h'' = 3 / (2 l^3) of the parabola.'''
        if self.kind != enums.LimitKind.PARABOLA:
            raise errors.NotApplicable('only the parabola is smooth')
        return 1.5 / self.ell ** 3

    def heights(self, x: Array) -> Array:
        '''Evaluates the shape centered at 0.'''
        x = np.asarray(x, dtype=float)
        if self.kind == enums.LimitKind.PARABOLA:
            return 0.75 / self.ell ** 3 * np.maximum(
                self.ell ** 2 - x * x, 0.0)
        return np.where(np.abs(x) < 0.5 * self.ell, 1.0 / self.ell, 0.0)

    def to_dict(self) -> dict:
        '''Returns the fields of the limit-shape JSON.'''
        return {'kind': str(self.kind), 'ell': self.ell, 'C_W': self.c_w,
                'energy': self.energy,
                'elastic_energy': self.elastic_energy}


def limit_minimizer(kind: enums.LimitKind,
                    c_w: float = elastic.CW_EXACT) -> LimitShape:
    '''Returns the closed-form minimizer of the reduced energy.

    The parabola has half width (9 / (16 C_W))^(1/5) and
    G = (20/3) C_W l^2. The rectangle minimizes C_W b^2 + 2/b,
    hence b = C_W^(-1/3) and G = 3 C_W^(1/3).
    '''
    if not (math.isfinite(c_w) and c_w > 0.0):
        raise errors.InvalidParameter('C_W must be positive')
    if kind == enums.LimitKind.PARABOLA:
        ell = (9.0 / (16.0 * c_w)) ** 0.2
        return LimitShape(kind, ell, c_w, parabola_energy(ell, c_w),
                          4.0 * c_w * ell * ell)
    assert kind == enums.LimitKind.RECTANGLE
    base = c_w ** (-1.0 / 3.0)
    return LimitShape(kind, base, c_w, rectangle_energy(base, c_w),
                      c_w * base * base)


def sample(shape: LimitShape, n_cells: int = 512,
           pad_cells: int = 2) -> profile.Profile:
    '''Returns the shape as a unit-volume profile whose support ends fall
    on nodes, with n_cells cells over the support and pad_cells empty
    cells on each side.'''
    if n_cells < 2 or pad_cells < 1:
        raise errors.InvalidParameter('need n_cells >= 2 and pad_cells >= 1')
    half = 0.5 * shape.support_length
    dx = 2.0 * half / n_cells
    grid = profile.Grid1D(-half - pad_cells * dx, half + pad_cells * dx,
                          n_cells + 2 * pad_cells)
    h = shape.heights(grid.nodes())
    if shape.kind == enums.LimitKind.RECTANGLE:
        # Heights on the support ends are zero so the interpolant keeps
        # the support length.
        h[pad_cells] = 0.0
        h[-1 - pad_cells] = 0.0
    h[0] = 0.0
    h[-1] = 0.0
    return profile.normalized(profile.Profile(grid, h), 1.0)


def components(p: profile.Profile) -> List[Tuple[float, float]]:
    '''Returns the intervals [a, b] of the connected components of the
    support of the interpolant.'''
    x = p.x
    n = p.grid.n_nodes
    spans = []
    for run in segments.find_runs(p.support_mask()):
        closed = segments.closure(run, n)
        spans.append((float(x[closed.start]), float(x[closed.end - 1])))
    return spans


def reduced_energy(p: profile.Profile, c_w: float,
                   kind: profile.SurfaceEnergyKind) -> float:
    '''Returns C_W sum (b_i - a_i)^2 + S(p) for a unit-volume profile.'''
    if abs(profile.volume(p) - 1.0) > VOLUME_TOLERANCE:
        raise errors.InvalidInput(
            f'reduced energy needs unit volume, got {profile.volume(p)}')
    lengths = np.array([b - a for a, b in components(p)])
    return c_w * float(np.sum(lengths ** 2)) \
        + profile.surface_energy(p, kind.reporting())


def _check_island(res: optimizer.MinimizeResult) -> None:
    if res.wetting:
        raise errors.NotApplicable(
            f'V={res.target_volume} wets the window, no island to rescale')
    if not res.converged:
        raise errors.NotApplicable(
            f'V={res.target_volume} did not converge '
            f'(residual {res.el_residual:.3g}), not a minimizer')


def rescaled_profile(res: optimizer.MinimizeResult) -> profile.Profile:
    '''Returns x -> V^(-3/5) h(V^(2/5) x) (small slope) or
    x -> V^(-2/3) h(V^(1/3) x) (large slope), of unit volume. Only
    converged islands can be rescaled.'''
    _check_island(res)
    a, b, _ = _exponents(res.kind)
    vol = res.breakdown.V
    return profile.rescale_affine(res.profile, vol ** a, vol ** -b)


def rescaled_energy(res: optimizer.MinimizeResult) -> float:
    '''Returns G_V = V^(-4/5) (E + S) or V^(-2/3) (E + S).'''
    c = _exponents(res.kind)[2]
    return res.breakdown.V ** -c * res.breakdown.total


def bookkeeping_gap(res: optimizer.MinimizeResult) -> float:
    '''Returns the relative difference between rescaled_energy() and the
    rescaled elastic energy plus the surface energy of the rescaled
    profile.'''
    c = _exponents(res.kind)[2]
    h = rescaled_profile(res)
    scaled = res.breakdown.V ** -c * res.breakdown.E \
        + profile.surface_energy(h, res.kind)
    target = rescaled_energy(res)
    return abs(scaled - target) / target


def center_of_mass(p: profile.Profile) -> float:
    '''Returns the abscissa of the center of mass of the interpolant.'''
    x = p.x
    h = p.heights
    dx = p.grid.dx
    # exact first moment of each linear piece
    moments = dx / 6.0 * (h[:-1] * (2.0 * x[:-1] + x[1:])
                          + h[1:] * (x[:-1] + 2.0 * x[1:]))
    vol = profile.volume(p)
    if vol <= 0.0:
        raise errors.InvalidInput('center of mass of an empty profile')
    return float(np.sum(moments)) / vol


def _cell_quadrature(x: Array, nodes: Array, weights: Array
                     ) -> Tuple[Array, Array]:
    '''Returns quadrature points and weights for every cell of x.'''
    mid = 0.5 * (x[:-1] + x[1:])
    half = 0.5 * np.diff(x)
    points = mid[:, None] + half[:, None] * nodes[None, :]
    return points, half[:, None] * weights[None, :]


def _interpolant(p: profile.Profile, points: Array) -> Array:
    return np.interp(points, p.x, p.heights)


def _abs_linear_integral(a: Array, b: Array, dx: float) -> float:
    '''Returns the integral of |linear| over cells with end values a, b.'''
    same = a * b >= 0.0
    total = np.abs(a) + np.abs(b)
    safe = np.where(total > 0.0, total, 1.0)
    values = np.where(same, 0.5 * dx * total,
                      0.5 * dx * (a * a + b * b) / safe)
    return float(np.sum(values))


def stability_gap(p: profile.Profile, half_length: float, vol: float,
                  kind: profile.SurfaceEnergyKind) -> float:
    '''Returns the slack of the stability inequality of the regime.

    Small slope: the window must be [-L, L] and the volume V;
    h_min = (3V / (4L^3)) (L^2 - x^2) and the slack is
    S(h) - S(h_min) - (1 / 4L^2) int |h - h_min|^2.

    Large slope: the window must be [0, L] and the volume V;
    h_min = V/L on [0, L] and the slack is
    TV(h) - 2V/L - (1/L) int |h - h_min|.

    Both integrals are exact for the interpolant, so the slack is
    nonnegative up to rounding.
    '''
    length = half_length
    if not (math.isfinite(length) and length > 0.0 and vol > 0.0):
        raise errors.InvalidParameter('L and V must be positive')
    g = p.grid
    small = limit_kind(kind) == enums.LimitKind.PARABOLA
    lo, hi = (-length, length) if small else (0.0, length)
    tol = 1e-12 * max(1.0, length)
    if abs(g.x_min - lo) > tol or abs(g.x_max - hi) > tol:
        raise errors.InvalidInput(
            f'window must be [{lo}, {hi}], got [{g.x_min}, {g.x_max}]')
    if abs(profile.volume(p) - vol) > 1e-9 * vol:
        raise errors.InvalidInput(
            f'volume must be {vol}, got {profile.volume(p)}')
    if small:
        coef = 0.75 * vol / length ** 3
        points, weights = _cell_quadrature(p.x, _GAUSS_X, _GAUSS_W)
        diff = _interpolant(p, points) - coef * (length ** 2 - points ** 2)
        distance = float(np.sum(weights * diff * diff))
        return profile.surface_energy(p, profile.SMALL_SLOPE) \
            - 1.5 * vol * vol / length ** 3 - distance / (4.0 * length ** 2)
    d = p.heights - vol / length
    distance = _abs_linear_integral(d[:-1], d[1:], g.dx)
    return profile.total_variation(p) - 2.0 * vol / length \
        - distance / length


class Comparator(NamedTuple):
    '''Constrained comparator on the level set component [a, b].'''
    start: int
    end: int
    heights: Array


def level_component(p: profile.Profile,
                    level: float = LEVEL) -> segments.Segment:
    '''Returns the largest run of nodes with h > level.'''
    runs = segments.find_runs(p.heights > level)
    if not runs:
        raise errors.NotApplicable(f'profile never exceeds {level}')
    return segments.largest(runs)


def constrained_comparator(p: profile.Profile, kind: profile.SurfaceEnergyKind,
                           level: float = LEVEL) -> Comparator:
    '''Returns the comparator that agrees with p outside the largest
    component of {h > level}, has the same mass on it and minimizes the
    surface energy there: a linear function plus a parabola cap with the
    same end values (small slope), or a constant (large slope).'''
    run = level_component(p, level)
    if run.count() < 2:
        raise errors.NotApplicable('level set component is a single node')
    x = p.x[run.start:run.end]
    h = p.heights[run.start:run.end]
    dx = p.grid.dx
    width = x[-1] - x[0]
    mass = 0.5 * dx * float(np.sum(h[:-1] + h[1:]))
    if limit_kind(kind) == enums.LimitKind.PARABOLA:
        t = (x - x[0]) / width
        linear = h[0] + (h[-1] - h[0]) * t
        excess = mass - 0.5 * (h[0] + h[-1]) * width
        # c (x - a)(b - x) carries c w^3 / 6
        cap = 6.0 * excess / width ** 3 * (x - x[0]) * (x[-1] - x)
        return Comparator(run.start, run.end, linear + cap)
    return Comparator(run.start, run.end, np.full(len(x), mass / width))


def constrained_distance(p: profile.Profile, kind: profile.SurfaceEnergyKind,
                         level: float = LEVEL) -> float:
    '''Returns the L2 (small slope) or L1 (large slope) distance between p
    and its constrained comparator on the level set component.'''
    comp = constrained_comparator(p, kind, level)
    x = p.x[comp.start:comp.end]
    h = p.heights[comp.start:comp.end]
    if limit_kind(kind) == enums.LimitKind.PARABOLA:
        points, weights = _cell_quadrature(x, _GAUSS_X, _GAUSS_W)
        a = x[0]
        b = x[-1]
        t = (points - a) / (b - a)
        linear = h[0] + (h[-1] - h[0]) * t
        mass = 0.5 * p.grid.dx * float(np.sum(h[:-1] + h[1:]))
        excess = mass - 0.5 * (h[0] + h[-1]) * (b - a)
        bar = linear + 6.0 * excess / (b - a) ** 3 * (points - a) \
            * (b - points)
        diff = np.interp(points, x, h) - bar
        return math.sqrt(float(np.sum(weights * diff * diff)))
    d = h - comp.heights
    return _abs_linear_integral(d[:-1], d[1:], p.grid.dx)


def global_distance(p: profile.Profile, shape: LimitShape) -> float:
    '''Returns the L2 (parabola) or L1 (rectangle) distance between p,
    translated to its center of mass, and the limit shape.'''
    shift = center_of_mass(p)
    x = p.x - shift
    points, weights = _cell_quadrature(x, _GAUSS5_X, _GAUSS5_W)
    diff = np.interp(points, x, p.heights) - shape.heights(points)
    if shape.kind == enums.LimitKind.PARABOLA:
        return math.sqrt(float(np.sum(weights * diff * diff)))
    return float(np.sum(weights * np.abs(diff)))


@dataclass(frozen=True)
class ConvergenceRecord:
    '''Distances of rescaled minimizers to the limit.

    Attributes:
        kind                Surface energy.
        volumes             Volumes of the minimizers.
        distances           Distances to the constrained comparators.
        global_distances    Distances to the aligned limit shape.
        level               Level of the set defining the comparators.
    '''
    kind: profile.SurfaceEnergyKind
    volumes: Sequence[float]
    distances: Sequence[float]
    global_distances: Optional[Sequence[float]] = None
    level: float = LEVEL

    def __post_init__(self):
        if len(self.volumes) != len(self.distances):
            raise errors.InvalidInput('one distance per volume expected')
        if any(d < 0.0 for d in self.distances):
            raise errors.InvalidInput('distances must be nonnegative')

    @property
    def rate_abscissa(self) -> Array:
        '''V^(1/5) (small slope) or V^(1/3) (large slope).'''
        power = 0.2 if limit_kind(self.kind) == \
            enums.LimitKind.PARABOLA else 1.0 / 3.0
        return np.asarray(self.volumes, dtype=float) ** power

    @property
    def fitted_rate(self) -> float:
        '''Slope of log distance against rate_abscissa.'''
        return -decay_fit(self).c1


def measure_convergence(results: Sequence[optimizer.MinimizeResult],
                        c_w: float = elastic.CW_EXACT,
                        level: float = LEVEL) -> ConvergenceRecord:
    '''Rescales every minimizer and measures both distances.'''
    if not results:
        raise errors.InvalidInput('no minimizers')
    kind = results[0].kind
    shape = limit_minimizer(limit_kind(kind), c_w)
    ordered = sorted(results, key=lambda r: r.target_volume)
    distances = []
    global_distances = []
    for res in ordered:
        if res.kind != kind:
            raise errors.InvalidInput('minimizers of mixed kinds')
        h = rescaled_profile(res)
        distances.append(constrained_distance(h, kind, level))
        global_distances.append(global_distance(h, shape))
    return ConvergenceRecord(kind, [r.target_volume for r in ordered],
                             distances, global_distances, level)


class DecayFit(NamedTuple):
    '''Fit of distance = c0 exp(-c1 abscissa). monotone is False when the
    distances do not strictly decrease.'''
    c0: float
    c1: float
    monotone: bool


def decay_fit(record: ConvergenceRecord) -> DecayFit:
    '''Returns the least-squares fit of log distance against the rate
    abscissa.'''
    d = np.asarray(record.distances, dtype=float)
    if len(d) < 4:
        raise errors.InvalidInput('decay fit needs at least 4 volumes')
    if np.any(d <= 0.0):
        raise errors.InvalidInput('decay fit needs positive distances')
    slope, intercept = np.polyfit(record.rate_abscissa, np.log(d), 1)
    return DecayFit(float(math.exp(intercept)), float(-slope),
                    bool(np.all(np.diff(d) < 0.0)))


def write_convergence_csv(record: ConvergenceRecord, path) -> None:
    '''Writes one row per volume.'''
    n = len(record.volumes)
    global_distances = np.full(n, math.nan) \
        if record.global_distances is None \
        else np.asarray(record.global_distances, dtype=float)
    rows = np.column_stack([np.asarray(record.volumes, dtype=float),
                            np.asarray(record.distances, dtype=float),
                            global_distances, record.rate_abscissa])
    np.savetxt(path, rows, delimiter=',', header=CONVERGENCE_CSV_HEADER,
               comments='', fmt='%.17g')


def write_shape_json(shape: LimitShape, path) -> None:
    '''Writes the limit shape.'''
    storage.write_json(path, shape.to_dict())
