'''Named invariant checks run by `islandf verify`.

Each check returns whether it passed and a one-line detail. Checks that
need minimizers share them through a Context, which computes every
minimizer at most once.
'''

import math

from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from typing import Callable
from typing import Dict
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from . import elastic
from . import enums
from . import errors
from . import limits
from . import optimizer
from . import profile
from . import scaling
from .debug import LOG
from .types import Resolution

Outcome = Tuple[bool, str]


def _default_flow() -> optimizer.FlowConfig:
    return optimizer.FlowConfig(
        max_iters=2000, restarts=1,
        resolution=Resolution(cells=128, layers=12))


@dataclass(frozen=True)
class VerifyConfig:
    '''Parameters of the verification suite.

    Attributes:
        volume          Volume of the island minimizers.
        flow            Optimizer configuration of the minimizers.
        concavity       Volumes of the concavity sweep.
        samples         Random profiles per stability inequality.
        seed            Seed of the random profiles.
        flip_el_sign    Flip the sign of the surface term in the residual.
    '''
    volume: float = 100.0
    flow: optimizer.FlowConfig = field(default_factory=_default_flow)
    concavity: Sequence[float] = (25.0, 50.0, 100.0)
    samples: int = 1000
    seed: int = 0
    flip_el_sign: bool = False


class Context:
    '''Lazily computed minimizers shared between checks.'''
    def __init__(self, cfg: VerifyConfig):
        self.cfg = cfg
        self._cache: Dict[Tuple[str, float], optimizer.MinimizeResult] = {}

    def minimizer(self, kind: profile.SurfaceEnergyKind,
                  vol: Optional[float] = None) -> optimizer.MinimizeResult:
        '''Returns the minimizer of the given kind and volume.'''
        vol = self.cfg.volume if vol is None else vol
        key = (str(kind), vol)
        if key not in self._cache:
            flow = replace(self.cfg.flow, kind=kind)
            self._cache[key] = optimizer.minimize(vol, flow)
        return self._cache[key]


def random_feasible(rng: np.random.Generator,
                    kind: profile.SurfaceEnergyKind, length: float,
                    vol: float, n_cells: int = 64) -> profile.Profile:
    '''Returns a random profile admissible for stability_gap(): on
    [-L, L] for the small-slope energy, on [0, L] for the large-slope
    one, with volume V.'''
    small = limits.limit_kind(kind) == enums.LimitKind.PARABOLA
    grid = profile.Grid1D(-length if small else 0.0, length, n_cells)
    x = grid.nodes()
    if small:
        base = np.maximum(length ** 2 - x * x, 0.0)
    else:
        base = np.ones(grid.n_nodes)
    noise = rng.uniform(0.0, 1.0, grid.n_nodes)
    weight = rng.uniform(0.0, 2.0)
    h = base / max(base.max(), 1e-300) + weight * noise
    h[0] = 0.0
    h[-1] = 0.0
    return profile.normalized(profile.Profile(grid, h), vol)


def check_rescaling(_: Context) -> Outcome:
    '''Exact rescaling of volume, surface and elastic energies.'''
    grid = profile.Grid1D.centered(8.0, 64)
    p = profile.parabola(grid, 3.0, 2.5)
    lam = 1.7
    iso = profile.rescale_isotropic(p, lam)
    ani = profile.rescale_anisotropic(p, lam)
    res = Resolution(cells=64, layers=8, backend=enums.SolverBackend.DIRECT)
    e0 = elastic.solve_elastic(p, res).energy
    e1 = elastic.solve_elastic(iso, res).energy
    gaps = [
        abs(profile.volume(iso) * lam ** 2 / profile.volume(p) - 1.0),
        abs(profile.surface_energy(iso, profile.SMALL_SLOPE) * lam
            / profile.surface_energy(p, profile.SMALL_SLOPE) - 1.0),
        abs(profile.total_variation(iso) * lam
            / profile.total_variation(p) - 1.0),
        abs(profile.volume(ani) / profile.volume(p) - 1.0),
        abs(profile.surface_energy(ani, profile.SMALL_SLOPE)
            / profile.surface_energy(p, profile.SMALL_SLOPE) / lam ** 3
            - 1.0),
        abs(e1 * lam ** 2 / e0 - 1.0),
    ]
    worst = max(gaps)
    return worst <= 1e-8, f'largest relative error {worst:.2e}'


def check_interpolation(_: Context) -> Outcome:
    '''Interpolation inequality, tight on its extremizer.'''
    grid = profile.Grid1D.centered(4.0, 4000)
    tight = profile.interpolation_gap(profile.extremizer(grid))
    rng = np.random.default_rng(1)
    worst = math.inf
    for _ in range(200):
        h = rng.uniform(0.0, 1.0, 65)
        h[0] = 0.0
        h[-1] = 0.0
        p = profile.Profile(profile.Grid1D(0.0, 1.0, 64), h)
        worst = min(worst, profile.interpolation_gap(p))
    passed = abs(tight) <= 1e-4 and worst >= 0.0
    return passed, f'extremizer gap {tight:.2e}, smallest gap {worst:.2e}'


def check_flux_identity(_: Context) -> Outcome:
    '''Elastic energy equals V minus the boundary flux.'''
    grid = profile.Grid1D.centered(10.0, 80)
    p = profile.parabola(grid, 5.0, 3.0)
    sol = elastic.solve_elastic(
        p, Resolution(layers=12, backend=enums.SolverBackend.DIRECT))
    gap = elastic.flux_identity_gap(sol, p)
    return gap <= 1e-8, f'relative gap {gap:.2e}'


def check_corrector_series(_: Context) -> Outcome:
    '''Cosine series of the corrector converges to 7 zeta(3) / pi^3.'''
    value = elastic.corrector_series(20.0)
    error = abs(value - elastic.CW_EXACT)
    return error <= 1e-9, f'series {value:.10f}, error {error:.2e}'


def check_el_residual(ctx: Context) -> Outcome:
    '''Euler-Lagrange residual of the small-slope minimizer.'''
    res = ctx.minimizer(profile.SMALL_SLOPE)
    residual = optimizer.el_residual_with_sign(res, ctx.cfg.flip_el_sign)
    tol = ctx.cfg.flow.tol_residual
    return residual <= tol, f'residual {residual:.3g} (tolerance {tol:g})'


def check_lambda_identity(ctx: Context) -> Outcome:
    '''Multiplier identity lambda V = F - S/2.'''
    res = ctx.minimizer(profile.SMALL_SLOPE)
    gap = optimizer.lagrange_identity_gap(res)
    return gap <= 0.05, f'relative gap {gap:.3g}'


def check_balance_small(ctx: Context) -> Outcome:
    '''Integral of (d_y u)^2 is 3/4 of the small-slope surface energy.'''
    res = ctx.minimizer(profile.SMALL_SLOPE)
    ratio = elastic.balance_ratio(res.solution, res.profile, res.kind)
    return abs(ratio - 0.75) <= 0.05, f'ratio {ratio:.4f}'


def check_balance_large(ctx: Context) -> Outcome:
    '''Integral of (d_y u)^2 is 1/4 of the total variation.'''
    res = ctx.minimizer(profile.LARGE_SLOPE)
    ratio = elastic.balance_ratio(res.solution, res.profile, res.kind)
    return abs(ratio - 0.25) <= 0.05, f'ratio {ratio:.4f}'


def check_concavity(ctx: Context) -> Outcome:
    '''Minimal energy is concave in the volume.'''
    volumes = sorted(ctx.cfg.concavity)
    results = [ctx.minimizer(profile.SMALL_SLOPE, v) for v in volumes]
    sw = scaling.SweepResult(profile.SMALL_SLOPE, volumes,
                             [r.breakdown.total for r in results])
    gap = scaling.concavity_gap(sw)
    return gap <= 0.02, f'second difference {gap:.3g}'


def check_stability(ctx: Context) -> Outcome:
    '''Both stability inequalities on random admissible profiles.'''
    rng = np.random.default_rng(ctx.cfg.seed)
    worst = math.inf
    for kind in (profile.SMALL_SLOPE, profile.LARGE_SLOPE):
        for _ in range(ctx.cfg.samples):
            length = rng.uniform(0.5, 3.0)
            vol = rng.uniform(0.5, 3.0)
            p = random_feasible(rng, kind, length, vol)
            worst = min(worst, limits.stability_gap(p, length, vol, kind))
    return worst >= -1e-8, f'smallest slack {worst:.3e}'


def check_constructions(_: Context) -> Outcome:
    '''Closed forms of the three dimensional constructions.'''
    pyramid = scaling.construct_3d(enums.ConstructionKind.PYRAMID, 1.0)
    layer = scaling.construct_3d(enums.ConstructionKind.THIN_LAYER, 1.0,
                                 1e-6)
    ok = abs(pyramid.total - 10.25) <= 1e-12 and abs(layer.total - 2.0) \
        <= 1e-2
    return ok, f'pyramid {pyramid.total:.6f}, thin layer {layer.total:.6f}'


def check_limit_shapes(_: Context) -> Outcome:
    '''Sampled limit shapes reproduce their closed-form energies.'''
    worst = 0.0
    for kind, surface in ((enums.LimitKind.PARABOLA, profile.SMALL_SLOPE),
                          (enums.LimitKind.RECTANGLE, profile.LARGE_SLOPE)):
        shape = limits.limit_minimizer(kind)
        energy = limits.reduced_energy(limits.sample(shape, 2048),
                                       shape.c_w, surface)
        worst = max(worst, abs(energy / shape.energy - 1.0))
    return worst <= 1e-3, f'largest relative error {worst:.2e}'


class Check(NamedTuple):
    '''A named check.'''
    name: str
    func: Callable[[Context], Outcome]

    @property
    def description(self) -> str:
        '''First line of the docstring of the check.'''
        return (self.func.__doc__ or '').strip().splitlines()[0]


CHECKS: List[Check] = [
    Check('rescaling', check_rescaling),
    Check('interpolation', check_interpolation),
    Check('flux-identity', check_flux_identity),
    Check('corrector-series', check_corrector_series),
    Check('el-residual', check_el_residual),
    Check('lambda-identity', check_lambda_identity),
    Check('balance-small-slope', check_balance_small),
    Check('balance-large-slope', check_balance_large),
    Check('concavity', check_concavity),
    Check('stability', check_stability),
    Check('constructions', check_constructions),
    Check('limit-shapes', check_limit_shapes),
]


class CheckOutcome(NamedTuple):
    '''Result of one check.'''
    name: str
    passed: bool
    detail: str


def names() -> List[str]:
    '''Returns the names of all checks.'''
    return [c.name for c in CHECKS]


def run_checks(cfg: VerifyConfig,
               only: Optional[Sequence[str]] = None) -> List[CheckOutcome]:
    '''Runs the selected checks (all by default) in suite order. A check
    raising an IslandError fails with the error as detail.'''
    if only:
        unknown = sorted(set(only) - set(names()))
        if unknown:
            raise errors.InvalidParameter(
                f'unknown checks: {", ".join(unknown)}')
    ctx = Context(cfg)
    outcomes = []
    for check in CHECKS:
        if only and check.name not in only:
            continue
        LOG.info('running check %s', check.name)
        try:
            passed, detail = check.func(ctx)
        except errors.IslandError as ex:
            passed, detail = False, f'{type(ex).__name__}: {ex}'
        outcomes.append(CheckOutcome(check.name, bool(passed), detail))
    return outcomes
