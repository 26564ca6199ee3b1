'''Volume sweeps, scaling laws and the explicit constructions.

A sweep minimizes the energy at a list of volumes, each on its own
automatically sized window, and fits the exponents of the total energy
and of the maximal height over the top decade of island-regime volumes.
The wetting threshold is bracketed by the first volume whose energy per
volume drops below 1 - theta.

The closed-form constructions give upper bounds: tents and boxes in two
dimensions, thin layers, pyramids and boxes in three.
'''

import functools
import math

from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence

import numpy as np

from . import enums
from . import errors
from . import optimizer
from . import profile
from . import storage
from . import utils
from .debug import LOG

# Margin below 1 of the energy per volume that marks an island.
DETECTION_MARGIN = 0.02

SWEEP_CSV_HEADER = 'V,E,S,total,beta,lambda,maxh,support,converged'


class VbarBracket(NamedTuple):
    '''Interval containing the wetting threshold. lower is None when the
    smallest swept volume is already an island.'''
    lower: Optional[float]
    upper: float

    @property
    def midpoint(self) -> float:
        '''Center of the bracket.'''
        if self.lower is None:
            return 0.5 * self.upper
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        '''Uncertainty of the midpoint.'''
        return self.upper - (self.lower or 0.0)


@dataclass(frozen=True, eq=False)
class SweepResult:
    '''Energies of a volume sweep, one entry per volume.

    Only kind, volumes and totals are required, so synthetic sweeps can
    be checked with the same functions.
    '''
    # pylint: disable=too-many-instance-attributes
    kind: profile.SurfaceEnergyKind
    volumes: Sequence[float]
    totals: Sequence[float]
    energies: Optional[Sequence[float]] = None
    surfaces: Optional[Sequence[float]] = None
    lambdas: Optional[Sequence[float]] = None
    maxheights: Optional[Sequence[float]] = None
    supports: Optional[Sequence[float]] = None
    converged: Optional[Sequence[bool]] = None
    theta: float = DETECTION_MARGIN
    results: List[optimizer.MinimizeResult] = field(default_factory=list,
                                                    repr=False)

    def __post_init__(self):
        volumes = np.asarray(self.volumes, dtype=float)
        if len(volumes) == 0:
            raise errors.InvalidInput('sweep without volumes')
        if np.any(np.diff(volumes) <= 0.0):
            raise errors.InvalidInput('volumes must be strictly increasing')
        for name in ('totals', 'energies', 'surfaces', 'lambdas',
                     'maxheights', 'supports', 'converged'):
            values = getattr(self, name)
            if values is not None and len(values) != len(volumes):
                raise errors.InvalidInput(
                    f'{name} has {len(values)} entries for '
                    f'{len(volumes)} volumes')

    @property
    def betas(self) -> np.ndarray:
        '''Energy per volume.'''
        return np.asarray(self.totals, dtype=float) / np.asarray(
            self.volumes, dtype=float)

    def converged_mask(self) -> np.ndarray:
        '''Returns the mask of converged volumes (all for synthetic
        sweeps).'''
        if self.converged is None:
            return np.ones(len(self.volumes), dtype=bool)
        return np.asarray(self.converged, dtype=bool)

    def island_mask(self) -> np.ndarray:
        '''Returns the mask of converged volumes with beta < 1 - theta.'''
        return self.converged_mask() & (self.betas < 1.0 - self.theta)

    def fit_mask(self) -> np.ndarray:
        '''Returns the island volumes of the top decade.'''
        mask = self.island_mask()
        if not mask.any():
            return mask
        volumes = np.asarray(self.volumes, dtype=float)
        return mask & (volumes >= 0.1 * volumes[mask].max())

    @property
    def fitted_exponent(self) -> float:
        '''Slope of log total against log V over the top decade, NaN with
        fewer than two points.'''
        return _fit(self.volumes, self.totals, self.fit_mask())

    @property
    def vbar_estimate(self) -> Optional[VbarBracket]:
        '''Bracket of the wetting threshold, None if not found.'''
        betas = self.betas
        ok = self.converged_mask()
        previous = None
        for vol, beta, good in zip(self.volumes, betas, ok):
            if not good:
                continue
            if beta < 1.0 - self.theta:
                return VbarBracket(previous, float(vol))
            previous = float(vol)
        return None

    def to_dict(self) -> dict:
        '''Returns the fit summary.'''
        vbar = self.vbar_estimate
        return {
            'kind': str(self.kind),
            'volumes': [float(v) for v in self.volumes],
            'fitted_exponent': self.fitted_exponent,
            'maxheight_exponent': maxheight_law(self)
            if self.maxheights is not None else None,
            'fit_volumes': [float(v) for v, m in
                            zip(self.volumes, self.fit_mask()) if m],
            'vbar': None if vbar is None else {
                'lower': vbar.lower, 'upper': vbar.upper,
                'midpoint': vbar.midpoint, 'width': vbar.width},
            'theta': self.theta,
            'unconverged': [float(v) for v, m in
                            zip(self.volumes, self.converged_mask())
                            if not m],
            'concavity_gap': concavity_gap(self)
            if len(self.volumes) >= 3 else None,
            'beta_monotonicity_gap': beta_monotonicity_gap(self),
        }


def _fit(x, y, mask) -> float:
    mask = np.asarray(mask, dtype=bool)
    if mask.sum() < 2:
        return math.nan
    return utils.loglog_fit(np.asarray(x, dtype=float)[mask],
                            np.asarray(y, dtype=float)[mask]).slope


def _solve_point(cfg: optimizer.FlowConfig,
                 vol: float) -> optimizer.MinimizeResult:
    return optimizer.minimize(vol, cfg)


def sweep(kind: profile.SurfaceEnergyKind, volumes: Sequence[float],
          cfg: optimizer.FlowConfig, jobs: Optional[int] = 1,
          theta: float = DETECTION_MARGIN) -> SweepResult:
    '''Minimizes at every volume (sorted, duplicates removed), in parallel
    when jobs > 1. Unconverged volumes are kept, flagged and excluded from
    the fits.'''
    volumes = np.unique(np.asarray(volumes, dtype=float))
    if len(volumes) == 0:
        raise errors.InvalidParameter('empty volume list')
    if np.any(volumes <= 0.0) or not np.all(np.isfinite(volumes)):
        raise errors.InvalidParameter('volumes must be positive')
    cfg = replace(cfg, kind=kind)
    results = utils.run_jobs(functools.partial(_solve_point, cfg),
                             [float(v) for v in volumes], jobs)
    for res in results:
        if not res.converged:
            LOG.warning('V=%g did not converge (residual %.3g)',
                        res.target_volume, res.el_residual)
    return SweepResult(
        kind=kind.reporting(),
        volumes=[float(v) for v in volumes],
        totals=[r.breakdown.total for r in results],
        energies=[r.breakdown.E for r in results],
        surfaces=[r.breakdown.S for r in results],
        lambdas=[r.lam for r in results],
        maxheights=[profile.sup_norm(r.profile) for r in results],
        supports=[r.support_length for r in results],
        converged=[r.converged for r in results],
        theta=theta,
        results=results)


def second_difference_gap(volumes: Sequence[float],
                          values: Sequence[float]) -> float:
    '''Returns the largest normalized second difference over interior
    points. On nonuniform volumes the second difference is twice the
    deviation of F(V_i) above the chord through its neighbours, which
    reduces to F(V_i+1) + F(V_i-1) - 2F(V_i) for uniform steps. Concave
    data give values <= 0.'''
    v = np.asarray(volumes, dtype=float)
    f = np.asarray(values, dtype=float)
    if len(v) < 3:
        raise errors.InvalidInput('second differences need 3 points')
    left = v[1:-1] - v[:-2]
    right = v[2:] - v[1:-1]
    chord = (f[2:] * left + f[:-2] * right) / (left + right)
    return float(np.max(2.0 * (chord - f[1:-1]) / f[1:-1]))


def concavity_gap(sw: SweepResult) -> float:
    '''Returns second_difference_gap() of the converged totals.'''
    mask = sw.converged_mask()
    return second_difference_gap(np.asarray(sw.volumes)[mask],
                                 np.asarray(sw.totals)[mask])


def beta_monotonicity_gap(sw: SweepResult) -> float:
    '''Returns the largest relative increase of beta between consecutive
    converged volumes, 0 for a non-increasing sequence.'''
    betas = sw.betas[sw.converged_mask()]
    if len(betas) < 2:
        return 0.0
    return max(0.0, float(np.max(np.diff(betas) / betas[:-1])))


def maxheight_law(sw: SweepResult) -> float:
    '''Returns the log-log slope of max h against V over the island
    regime.'''
    if sw.maxheights is None:
        raise errors.InvalidInput('sweep has no maximal heights')
    return _fit(sw.volumes, sw.maxheights, sw.island_mask())


def interpolation_margins(sw: SweepResult) -> np.ndarray:
    '''Returns (9/16)^(1/3) V^(1/3) S^(1/3) - max h at every point, using
    the small-slope energy of each minimizer.'''
    if not sw.results:
        raise errors.InvalidInput('sweep has no minimizers')
    return np.array([profile.interpolation_gap(r.profile)
                     for r in sw.results])


def small_volume_limit(sw: SweepResult) -> float:
    '''Returns beta at the smallest converged volume.'''
    mask = sw.converged_mask()
    if not mask.any():
        raise errors.InvalidInput('sweep has no converged volume')
    return float(sw.betas[mask][0])


def wetting_threshold_lower() -> float:
    '''Returns 2^5 / (9 sqrt 3), below which the flat film is optimal.'''
    return optimizer.WETTING_THRESHOLD


def flat_tent_total(vol: float, half_width: float) -> float:
    '''Returns V + 2V^2/N^3, the energy of a flat film of volume V whose
    edges fall linearly over length N (elastic energy at most V).'''
    if not vol > 0.0 or not half_width > 0.0:
        raise errors.InvalidParameter('volume and width must be positive')
    return vol + 2.0 * vol * vol / half_width ** 3


def upper_bound_2d(kind: profile.SurfaceEnergyKind, vol: float) -> float:
    '''Returns the explicit upper bound on the minimal energy: the flat
    film V, the tent (10/3 + 2) V^(4/5) for the small-slope energy and the
    box (5/12 + 2) V^(2/3) for the large-slope energy.'''
    if not vol > 0.0:
        raise errors.InvalidParameter('volume must be positive')
    if kind.tag == enums.SurfaceTag.LARGE_SLOPE:
        return min(vol, (5.0 / 12.0 + 2.0) * vol ** (2.0 / 3.0))
    if kind.tag == enums.SurfaceTag.SMALL_SLOPE:
        return min(vol, (10.0 / 3.0 + 2.0) * vol ** 0.8)
    raise errors.NotApplicable(f'no explicit bound for {kind}')


@dataclass(frozen=True)
class Construction3D:
    '''Closed-form three-dimensional competitor.

    Attributes:
        kind        Construction.
        V           Volume.
        L           Half side of the base (thin layer, pyramid) or side of
                    the base (box).
        H           Height.
        eps         Thickness parameter of the thin layer, else None.
        E_analytic  Elastic energy bound.
        S_analytic  Surface energy.
    '''
    kind: enums.ConstructionKind
    V: float
    L: float
    H: float
    eps: Optional[float]
    E_analytic: float
    S_analytic: float

    @property
    def total(self) -> float:
        '''E_analytic + S_analytic.'''
        return self.E_analytic + self.S_analytic

    def volume(self) -> float:
        '''Returns the volume of the construction from its parameters.'''
        if self.kind == enums.ConstructionKind.THIN_LAYER:
            e = self.eps
            return 4.0 * e * self.L ** 2 + 4.0 * e * e * self.L \
                + 4.0 / 3.0 * e ** 3
        if self.kind == enums.ConstructionKind.PYRAMID:
            return 4.0 / 3.0 * self.H * self.L ** 2
        return self.H * self.L ** 2

    def to_dict(self) -> dict:
        '''Returns the fields of the construction JSON.'''
        return {'kind': str(self.kind), 'V': self.V, 'L': self.L,
                'H': self.H, 'eps': self.eps, 'E': self.E_analytic,
                'S': self.S_analytic, 'total': self.total}


def construct_3d(kind: enums.ConstructionKind, vol: float,
                 eps: Optional[float] = None) -> Construction3D:
    '''Returns the closed-form construction of the given volume.

    ThinLayer: a square layer of thickness eps and half side L with
    pyramidal rims, 4 eps L^2 + 4 eps^2 L + (4/3) eps^3 = V; the substrate
    field gives E = 2V, and S = 4(sqrt(V eps) + eps^2).
    Pyramid: L = V^(2/7), H = (3/4) V^(3/7), S = 4H^2, E = 8L^3.
    BoxLargeSlope: base side b = V^(1/4), height V/b^2, surface 4bH; the
    field (x, y)(1 - z/b)+ gives
    E = (2b^3/3)(1 - (1 - z_m/b)^3) + b^2 z_m / 6, z_m = min(H, b).
    '''
    if not (math.isfinite(vol) and vol > 0.0):
        raise errors.InvalidParameter('volume must be positive')
    if kind == enums.ConstructionKind.THIN_LAYER:
        if eps is None or not (math.isfinite(eps) and eps > 0.0):
            raise errors.InvalidParameter('thin layer needs eps > 0')
        root = vol / eps - eps * eps / 3.0
        half = 0.5 * (-eps + math.sqrt(root)) if root > 0.0 else -1.0
        if half < 0.0:
            raise errors.InvalidParameter(
                f'eps={eps} too thick for volume {vol}')
        return Construction3D(kind, vol, half, eps, eps, 2.0 * vol,
                              4.0 * (math.sqrt(vol * eps) + eps * eps))
    if eps is not None:
        raise errors.InvalidParameter(f'{kind} takes no eps')
    if kind == enums.ConstructionKind.PYRAMID:
        half = vol ** (2.0 / 7.0)
        height = 0.75 * vol ** (3.0 / 7.0)
        return Construction3D(kind, vol, half, height, None,
                              8.0 * half ** 3, 4.0 * height ** 2)
    assert kind == enums.ConstructionKind.BOX_LARGE_SLOPE
    side = vol ** 0.25
    height = vol / side ** 2
    z_m = min(height, side)
    elastic = 2.0 * side ** 3 / 3.0 * (1.0 - (1.0 - z_m / side) ** 3) \
        + side * side * z_m / 6.0
    return Construction3D(kind, vol, side, height, None, elastic,
                          4.0 * side * height)


def sweep_rows(sw: SweepResult) -> np.ndarray:
    '''Returns the rows of the sweep CSV.'''
    n = len(sw.volumes)

    def column(values):
        return np.full(n, math.nan) if values is None \
            else np.asarray(values, dtype=float)

    return np.column_stack([
        np.asarray(sw.volumes, dtype=float), column(sw.energies),
        column(sw.surfaces), np.asarray(sw.totals, dtype=float), sw.betas,
        column(sw.lambdas), column(sw.maxheights), column(sw.supports),
        sw.converged_mask().astype(float)])


def write_sweep_csv(sw: SweepResult, path) -> None:
    '''Writes one row per volume.'''
    np.savetxt(path, sweep_rows(sw), delimiter=',', header=SWEEP_CSV_HEADER,
               comments='', fmt='%.17g')


def write_sweep_json(sw: SweepResult, path) -> None:
    '''Writes the fit summary.'''
    storage.write_json(path, sw.to_dict())
