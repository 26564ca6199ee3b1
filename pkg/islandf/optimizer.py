'''Minimization of the total energy at fixed volume.

The minimizer is a projected gradient flow on the nodal heights. The L2
gradient of E + S is g = |grad u|^2(., h) + dS/dh, where the first term is
the exact discrete shape derivative computed by the elastic solver, and
dS/dh = -2h'' for the small-slope energy. A step is

    h <- P[h - tau (g - lambda)]

where P clips negative heights and rescales vertically to the target
volume. Only the active nodes move: those above zero and the void ones
where g < lambda. The default semi-implicit scheme treats the surface term
implicitly (lagged weights for the total variation and the exact energy),
which removes the dx^2 restriction on tau, and solves for lambda on the
active set. Steps that increase the energy are rejected and tau is
halved; accepted steps double tau. A flow that stalls before its residual
is small goes on with explicit steps.
'''

import math

from dataclasses import dataclass
from dataclasses import field
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Tuple

import numpy as np
import scipy.linalg

from . import elastic
from . import enums
from . import errors
from . import profile
from . import segments
from .debug import LOG
from .debug import out
from .types import Array
from .types import Resolution

PROJECTION_PASSES = 5
PENALTY_CONSTANT = 4.0
# Relative width of the quadratic band of the smoothed exact penalty.
PENALTY_BAND = 1e-3
WETTING_THRESHOLD = 2.0 ** 5 / (9.0 * math.sqrt(3.0))


def default_penalty(vol: float) -> float:
    '''Returns mu = 4 min{1, V^(-1/5)}, large enough for the penalized
    problem to have the same minimizers.'''
    return PENALTY_CONSTANT * min(1.0, vol ** -0.2)


@dataclass(frozen=True)
class FlowConfig:
    '''Configuration of the gradient flow.

    Attributes:
        kind            Surface energy to minimize.
        tau             Initial step, None for 0.1 dx^2.
        max_iters       Cap on accepted plus rejected steps of one start.
        tol_residual    Relative Euler-Lagrange residual for convergence.
        volume_mode     Projection onto the volume or exact penalty.
        penalty_mu      Penalty weight, None for default_penalty(V).
        restarts        Number of initial profiles tried.
        seed            Seed of the random perturbations of restarts.
        scheme          Semi-implicit or explicit steps.
        resolution      Elastic mesh and solver control; cells is also the
                        number of cells of automatically sized windows.
        plateau_iters   Steps without progress before semi-implicit steps
                        give way to explicit ones, or explicit ones stop
                        at the current smoothing.
        eps_start       Initial total variation smoothing, times the
                        typical slope max h / (|supp| / 2) of the start.
        eps_final       Final total variation smoothing, same scale.
    '''
    # pylint: disable=too-many-instance-attributes
    kind: profile.SurfaceEnergyKind = profile.SMALL_SLOPE
    tau: Optional[float] = None
    max_iters: int = 3000
    tol_residual: float = 0.05
    volume_mode: enums.VolumeMode = enums.VolumeMode.PROJECTION
    penalty_mu: Optional[float] = None
    restarts: int = 3
    seed: int = 0
    scheme: enums.StepScheme = enums.StepScheme.SEMI_IMPLICIT
    resolution: Resolution = field(default_factory=Resolution)
    plateau_iters: int = 25
    eps_start: float = 0.1
    eps_final: float = 1e-4

    def __post_init__(self):
        if self.tau is not None and not self.tau > 0.0:
            raise errors.InvalidParameter('tau must be positive')
        if self.max_iters < 1:
            raise errors.InvalidParameter('max_iters must be positive')
        if not self.tol_residual > 0.0:
            raise errors.InvalidParameter('tol_residual must be positive')
        if self.penalty_mu is not None and not self.penalty_mu > 0.0:
            raise errors.InvalidParameter('penalty mu must be positive')
        if self.restarts < 1:
            raise errors.InvalidParameter('restarts must be at least 1')
        if self.plateau_iters < 1:
            raise errors.InvalidParameter('plateau_iters must be positive')
        if not 0.0 < self.eps_final <= self.eps_start:
            raise errors.InvalidParameter(
                'smoothing factors must satisfy 0 < eps_final <= eps_start')


@dataclass(frozen=True)
class EnergyBreakdown:
    '''Energies of one configuration, reported without smoothing.

    Attributes:
        E          Elastic energy.
        S          Surface energy.
        total      E + S.
        V          Volume of the profile.
        beta       total / V.
        dx_energy  Integral of (d_x u)^2.
        dy_energy  Integral of (d_y u)^2.
    '''
    E: float
    S: float
    total: float
    V: float
    beta: float
    dx_energy: float
    dy_energy: float


def breakdown(p: profile.Profile, sol: elastic.ElasticSolution,
              kind: profile.SurfaceEnergyKind) -> EnergyBreakdown:
    '''Returns the energy breakdown of a solved profile.'''
    surf = profile.surface_energy(p, kind.reporting())
    vol = profile.volume(p)
    total = sol.energy + surf
    return EnergyBreakdown(E=sol.energy, S=surf, total=total, V=vol,
                           beta=total / vol, dx_energy=sol.dx_energy,
                           dy_energy=sol.dy_energy)


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    '''Outcome of minimize().

    Attributes:
        profile         Best profile found.
        breakdown       Its energies.
        lam             Lagrange multiplier estimate.
        el_residual     Relative L2 norm of g - lam on the support.
        contact_slope   Largest |h'| of the cells at the support edges.
        support_length  Measure of the closure of the support.
        iterations      Steps of the best start.
        converged       Whether el_residual <= tol_residual.
        target_volume   Requested volume.
        kind            Surface energy (unsmoothed).
        seed            Seed of the run.
        volume_mode     How the volume was enforced.
        wetting         Whether the support reaches the window ends.
        eps_tv          Last smoothing of the total variation.
        history         Objective after every accepted step at the last
                        smoothing (nonincreasing).
        solution        Elastic solution of the profile.
    '''
    # pylint: disable=too-many-instance-attributes
    profile: profile.Profile
    breakdown: EnergyBreakdown
    lam: float
    el_residual: float
    contact_slope: float
    support_length: float
    iterations: int
    converged: bool
    target_volume: float
    kind: profile.SurfaceEnergyKind
    seed: int
    volume_mode: enums.VolumeMode
    wetting: bool
    eps_tv: float
    history: List[float]
    solution: elastic.ElasticSolution

    def to_dict(self) -> dict:
        '''Returns the fields of the result JSON.'''
        b = self.breakdown
        return {
            'V': self.target_volume,
            'kind': str(self.kind),
            'E': b.E,
            'S': b.S,
            'total': b.total,
            'beta': b.beta,
            'lambda': self.lam,
            'el_residual': self.el_residual,
            'contact_slope': self.contact_slope,
            'support_length': self.support_length,
            'iterations': self.iterations,
            'converged': self.converged,
            'seed': self.seed,
            'volume_mode': str(self.volume_mode),
            'wetting': self.wetting,
            'max_height': profile.sup_norm(self.profile),
        }


class _State(NamedTuple):
    '''One evaluated iterate.'''
    profile: profile.Profile
    solution: elastic.ElasticSolution
    objective: float


class _Diagnostics(NamedTuple):
    lam: float
    residual: float


def default_window(vol: float, kind: profile.SurfaceEnergyKind,
                   cells: int) -> profile.Grid1D:
    '''Returns the centered window of width 8 V^(2/5) (8 V^(1/3) for the
    large-slope energy), at least 16 wide.'''
    exponent = 1.0 / 3.0 if kind.tag == enums.SurfaceTag.LARGE_SLOPE \
        else 0.4
    return profile.Grid1D.centered(8.0 * max(2.0, vol ** exponent), cells)


def project(heights: Array, dx: float, vol: float) -> Optional[Array]:
    '''Clips negative heights and rescales vertically to the given volume,
    repeating at most PROJECTION_PASSES times. Returns None when nothing
    positive is left. Window ends are set to zero.'''
    h = np.array(heights, dtype=float)
    h[0] = 0.0
    h[-1] = 0.0
    for _ in range(PROJECTION_PASSES):
        h = np.maximum(h, 0.0)
        current = dx * float(np.sum(h))
        if current <= 0.0:
            return None
        h = h * (vol / current)
        if h.min() >= 0.0 and abs(dx * float(np.sum(h)) - vol) \
                <= 1e-12 * vol:
            break
    return h


def support_segments(p: profile.Profile) -> List[segments.Segment]:
    '''Returns the runs of nodes above the height floor.'''
    return segments.find_runs(p.support_mask())


def connectedness(p: profile.Profile) -> int:
    '''Returns the number of connected components of {h > h_floor}.'''
    return len(support_segments(p))


def support_length(p: profile.Profile) -> float:
    '''Returns the measure of the cells where the interpolant is
    positive.'''
    n = p.grid.n_nodes
    cells = sum(segments.cell_count(s, n) for s in support_segments(p))
    return cells * p.grid.dx


def contact_slope(p: profile.Profile) -> float:
    '''Returns the largest |h'| over the cells bounding the support.'''
    runs = support_segments(p)
    if not runs:
        return 0.0
    slopes = np.abs(np.diff(p.heights)) / p.grid.dx
    edges = []
    for run in runs:
        if run.start > 0:
            edges.append(slopes[run.start - 1])
        if run.end < p.grid.n_nodes:
            edges.append(slopes[run.end - 1])
    return float(max(edges)) if edges else 0.0


def is_wetting(p: profile.Profile) -> bool:
    '''Returns whether the support reaches the cells next to the window
    ends.'''
    mask = p.support_mask()
    return bool(mask[1] or mask[-2])


def _surface_kind(kind: profile.SurfaceEnergyKind,
                  eps: float) -> profile.SurfaceEnergyKind:
    if kind.tag == enums.SurfaceTag.LARGE_SLOPE:
        return kind.smoothed(eps)
    return kind


def _penalty(vol: float, target: float, mu: float) -> Tuple[float, float]:
    '''Returns the smoothed penalty mu |V - vol| and its derivative with
    respect to the volume deficit.'''
    band = PENALTY_BAND * target
    deficit = target - vol
    if abs(deficit) >= band:
        return mu * (abs(deficit) - 0.5 * band), mu * math.copysign(
            1.0, deficit)
    return 0.5 * mu * deficit * deficit / band, mu * deficit / band


def _active_mask(heights: Array, g: Array, lam: float) -> Array:
    '''Returns the interior nodes a step may move: the positive ones and
    the void ones whose gradient lies below the multiplier.'''
    active = (heights > 0.0) | (g < lam)
    active[0] = False
    active[-1] = False
    return active


def _slope_scale(p: profile.Profile) -> float:
    '''Returns max h over half the support length.'''
    length = max(support_length(p), 2.0 * p.grid.dx)
    return 2.0 * profile.sup_norm(p) / length


def eps_schedule(start: float, final: float) -> List[float]:
    '''Returns the smoothings of the total variation continuation: start
    halved down to final, final included.'''
    levels = [start]
    while levels[-1] > final * 1.000001:
        levels.append(max(0.5 * levels[-1], final))
    return levels


class _Flow:
    '''Gradient flow of one start. The smoothing of the total variation
    is part of the state, since changing it changes the objective.'''
    def __init__(self, vol: float, cfg: FlowConfig, mu: float):
        self.vol = vol
        self.cfg = cfg
        self.mu = mu
        self.kind = cfg.kind
        self.eps = 0.0

    def set_eps(self, eps: float) -> None:
        '''Sets the smoothing of the total variation.'''
        self.eps = eps
        self.kind = _surface_kind(self.cfg.kind, eps)

    def penalized(self) -> bool:
        '''Returns whether the volume is enforced by the penalty.'''
        return self.cfg.volume_mode == enums.VolumeMode.PENALTY

    def evaluate(self, p: profile.Profile,
                 previous: Optional[elastic.ElasticSolution]) -> _State:
        '''Solves the elastic problem and evaluates the objective.'''
        x0 = None if previous is None else previous.nodal_values
        sol = elastic.solve_elastic(p, self.cfg.resolution, x0)
        objective = sol.energy + profile.surface_energy(p, self.kind)
        if self.penalized():
            objective += _penalty(profile.volume(p), self.vol, self.mu)[0]
        return _State(p, sol, objective)

    def gradient(self, state: _State) -> Array:
        '''Returns the L2 gradient of E + S (no volume term).'''
        p = state.profile
        return state.solution.shape_gradient \
            + profile.surface_gradient(p, self.kind) / p.grid.dx

    def diagnostics(self, state: _State, flip_sign: bool = False
                    ) -> _Diagnostics:
        '''Returns the multiplier estimate and the relative residual.'''
        p = state.profile
        surf = profile.surface_gradient(p, self.kind) / p.grid.dx
        g = state.solution.shape_gradient + (-surf if flip_sign else surf)
        return el_diagnostics(p, g)

    def step(self, state: _State, tau: float,
             scheme: enums.StepScheme) -> Optional[Array]:
        '''Returns the projected heights after a step of size tau, None if
        the step leaves nothing. Only the active nodes move; the others
        stay at zero.'''
        p = state.profile
        dx = p.grid.dx
        h = p.heights
        g = self.gradient(state)
        if self.penalized():
            lam = self._penalty_slope(p)
        else:
            lam = el_diagnostics(p, g).lam
        active = _active_mask(h, g, lam)
        if not active.any():
            return None
        if scheme == enums.StepScheme.EXPLICIT:
            if not self.penalized():
                # Zero mean on the active set keeps the volume.
                lam = float(np.mean(g[active]))
            trial = np.where(active, h - tau * (g - lam), 0.0)
            return self._constrain(trial, dx)

        weights = profile.surface_weights(p, self.kind)
        inner_active = active[1:-1]
        for _ in range(PROJECTION_PASSES):
            inner = self._implicit_solve(state, tau, weights, inner_active)
            negative = inner < 0.0
            if not negative.any():
                break
            inner_active = inner_active & ~negative
            if not inner_active.any():
                return None
        trial = np.concatenate(([0.0], inner, [0.0]))
        return self._constrain(trial, dx)

    def _implicit_solve(self, state: _State, tau: float, weights: Array,
                        active: Array) -> Array:
        '''Solves (dx/tau + D^T W D) h' = dx/tau h - dx (g_el - lam) on the
        active interior nodes, with h' = 0 elsewhere and lam set by the
        volume.'''
        p = state.profile
        dx = p.grid.dx
        m = len(active)
        banded = np.zeros((2, m))
        banded[1] = np.where(active, dx / tau + weights[:-1] + weights[1:],
                             1.0)
        banded[0, 1:] = np.where(active[:-1] & active[1:],
                                 -weights[1:-1], 0.0)
        rhs = np.zeros((m, 2))
        rhs[active, 0] = dx / tau * p.heights[1:-1][active] \
            - dx * state.solution.shape_gradient[1:-1][active]
        rhs[active, 1] = dx
        if self.penalized():
            rhs[active, 0] += dx * self._penalty_slope(p)
        sol = scipy.linalg.solveh_banded(banded, rhs, check_finite=False)
        if self.penalized():
            return sol[:, 0]
        base_vol = dx * float(np.sum(sol[:, 0]))
        unit_vol = dx * float(np.sum(sol[:, 1]))
        return sol[:, 0] + (self.vol - base_vol) / unit_vol * sol[:, 1]

    def _penalty_slope(self, p: profile.Profile) -> float:
        return _penalty(profile.volume(p), self.vol, self.mu)[1]

    def _constrain(self, trial: Array, dx: float) -> Optional[Array]:
        if self.penalized():
            trial = np.maximum(trial, 0.0)
            return trial if trial.any() else None
        return project(trial, dx, self.vol)

    def descend(self, state: _State, tau: float, budget: int
                ) -> Tuple[_State, List[float], _Diagnostics, int]:
        '''Steps at the current smoothing until the residual is below
        tol_residual, the budget is spent or the flow stalls. Returns the
        last state, its objective history, its diagnostics and the number
        of steps taken.

        A stalled semi-implicit flow goes on with explicit steps; only a
        stalled explicit flow ends the descent.'''
        # pylint: disable=too-many-locals
        cfg = self.cfg
        dx = state.profile.grid.dx
        tau_min = 1e-14 * dx * dx
        tau_max = 1e12 * dx * dx
        scheme = cfg.scheme
        history = [state.objective]
        diag = self.diagnostics(state)
        stalled = 0
        steps = 0
        while steps < budget and diag.residual > cfg.tol_residual:
            if stalled >= cfg.plateau_iters:
                if scheme == enums.StepScheme.EXPLICIT:
                    break
                LOG.debug('semi-implicit steps stalled at residual %.3g, '
                          'switching to explicit steps', diag.residual)
                scheme = enums.StepScheme.EXPLICIT
                tau = 0.1 * dx * dx
                stalled = 0
            steps += 1
            trial = None
            heights = self.step(state, tau, scheme)
            if heights is not None:
                try:
                    trial = self.evaluate(
                        state.profile.with_heights(heights), state.solution)
                except (errors.SolverFailure, errors.EmptyFilm) as ex:
                    LOG.debug('step rejected: %s', ex)
            if trial is None or trial.objective > state.objective:
                tau *= 0.5
                stalled += 1
                if tau < tau_min:
                    stalled = cfg.plateau_iters
                continue
            decrease = state.objective - trial.objective
            state = trial
            history.append(state.objective)
            tau = min(2.0 * tau, tau_max)
            diag = self.diagnostics(state)
            if decrease <= 1e-12 * abs(state.objective):
                stalled += 1
            else:
                stalled = 0
            out('step', steps, 'objective', state.objective,
                'residual', diag.residual, 'tau', tau)
        return state, history, diag, steps


def el_diagnostics(p: profile.Profile, g: Array) -> _Diagnostics:
    '''Returns the multiplier (mean of g over the support weighted by the
    heights) and the relative residual ||g - lam|| / (|lam| |supp|^(1/2)).
    '''
    mask = p.support_mask()
    mask[0] = False
    mask[-1] = False
    if not mask.any():
        return _Diagnostics(0.0, math.inf)
    values = g[mask]
    lam = float(np.average(values, weights=p.heights[mask]))
    if lam == 0.0:
        return _Diagnostics(lam, math.inf)
    rms = float(np.sqrt(np.mean((values - lam) ** 2)))
    return _Diagnostics(lam, rms / abs(lam))


def _run(start: profile.Profile, vol: float, cfg: FlowConfig,
         mu: float) -> MinimizeResult:
    '''Runs the flow from one initial profile. The large-slope energy is
    minimized along a decreasing sequence of smoothings, each one started
    from the minimizer of the previous one. The smoothings before the
    last get at most max_iters / (2 n) steps each, n being their count,
    and the last one gets the rest.'''
    # pylint: disable=too-many-locals
    flow = _Flow(vol, cfg, mu)
    levels = [0.0]
    if cfg.kind.tag == enums.SurfaceTag.LARGE_SLOPE:
        slope = _slope_scale(start)
        levels = eps_schedule(cfg.eps_start * slope, cfg.eps_final * slope)
        flow.set_eps(levels[0])
    dx = start.grid.dx
    tau = cfg.tau if cfg.tau is not None else 0.1 * dx * dx
    stage_budget = max(1, cfg.max_iters // (2 * len(levels)))

    state = flow.evaluate(start, None)
    iterations = 0
    history: List[float] = []
    diag = flow.diagnostics(state)
    for stage, eps in enumerate(levels):
        if stage > 0:
            # The objective changes with the smoothing.
            flow.set_eps(eps)
            state = flow.evaluate(state.profile, state.solution)
            out('eps_tv ->', eps)
        budget = cfg.max_iters - iterations
        if stage < len(levels) - 1:
            budget = min(budget, stage_budget)
        state, history, diag, steps = flow.descend(state, tau, budget)
        iterations += steps
    converged = diag.residual <= cfg.tol_residual

    p = state.profile
    kind = cfg.kind.reporting()
    result = MinimizeResult(
        profile=p,
        breakdown=breakdown(p, state.solution, kind),
        lam=diag.lam,
        el_residual=diag.residual,
        contact_slope=contact_slope(p),
        support_length=support_length(p),
        iterations=iterations,
        converged=converged,
        target_volume=vol,
        kind=kind,
        seed=cfg.seed,
        volume_mode=cfg.volume_mode,
        wetting=is_wetting(p),
        eps_tv=flow.eps,
        history=history,
        solution=state.solution)
    LOG.info('start done: V=%g total=%.8g residual=%.3g iterations=%d '
             'converged=%s', vol, result.breakdown.total, diag.residual,
             iterations, result.converged)
    return result


def initial_profiles(vol: float, grid: profile.Grid1D,
                     kind: profile.SurfaceEnergyKind, restarts: int,
                     seed: int) -> List[profile.Profile]:
    '''Returns the starts of minimize(): parabola, tent, flat layer and
    box, followed by seeded random perturbations of the parabola.'''
    large_slope = kind.tag == enums.SurfaceTag.LARGE_SLOPE
    lo = 2.0 * grid.dx
    hi = 0.45 * grid.length
    half = min(max(1.2 * vol ** (1.0 / 3.0 if large_slope else 0.4), lo),
               hi)
    tent_half = min(max(vol ** 0.4, lo), hi)
    box_width = min(max(vol ** (1.0 / 3.0), 2.0 * lo), 2.0 * hi)
    starts = [
        profile.parabola(grid, vol, half),
        profile.tent(grid, vol, tent_half),
        profile.flat_layer(grid, vol),
        profile.box(grid, vol, box_width),
    ][:restarts]
    rng = np.random.default_rng(seed)
    base = starts[0]
    while len(starts) < restarts:
        noise = 1.0 + 0.2 * rng.uniform(-1.0, 1.0, grid.n_nodes)
        starts.append(profile.normalized(
            base.with_heights(base.heights * noise), vol))
    return starts


def minimize(vol: float, cfg: FlowConfig,
             window: Optional[profile.Grid1D] = None) -> MinimizeResult:
    '''Minimizes E + S over profiles of volume vol on the window, returning
    the best result over the restarts. Non-convergence is reported in the
    result, not raised.'''
    if not (math.isfinite(vol) and vol > 0.0):
        raise errors.InvalidParameter('volume must be positive')
    if window is None:
        window = default_window(vol, cfg.kind, cfg.resolution.cells)
    mu = cfg.penalty_mu if cfg.penalty_mu is not None \
        else default_penalty(vol)
    best: Optional[MinimizeResult] = None
    for i, start in enumerate(initial_profiles(vol, window, cfg.kind,
                                               cfg.restarts, cfg.seed)):
        LOG.info('minimize V=%g kind=%s start %d/%d', vol, cfg.kind, i + 1,
                 cfg.restarts)
        result = _run(start, vol, cfg, mu)
        if best is None or result.breakdown.total < best.breakdown.total:
            best = result
    assert best is not None
    if 0.0 < best.lam < 1.0:
        bound = best.lam * best.breakdown.S / (1.0 - best.lam)
        if bound > window.length:
            LOG.warning('window of length %g is smaller than the support '
                        'bound %g', window.length, bound)
    return best


def derivative_estimate(res: MinimizeResult) -> float:
    '''Returns (E + S/2) / V, which equals F'(V) and lambda at minimizers.
    '''
    b = res.breakdown
    return (b.E + 0.5 * b.S) / b.V


def lagrange_identity_gap(res: MinimizeResult) -> float:
    '''Returns |lam V - (total - S/2)| / total.'''
    b = res.breakdown
    return abs(res.lam * b.V - (b.total - 0.5 * b.S)) / b.total


def support_bound_check(res: MinimizeResult, slack: float = 0.2) -> bool:
    '''Returns whether the support is at most lam S / (1 - lam), up to the
    relative slack.'''
    if res.lam >= 1.0 or res.wetting:
        raise errors.NotApplicable('support bound needs lambda < 1')
    bound = res.lam * res.breakdown.S / (1.0 - res.lam)
    return res.support_length <= bound * (1.0 + slack)


def lambda_upper_bounds(res: MinimizeResult) -> Tuple[float, float]:
    '''Returns the island regime bounds 1 - S/(2V) and
    1 - (2^9/3^5) V^(-2) on the multiplier.'''
    b = res.breakdown
    return 1.0 - 0.5 * b.S / b.V, 1.0 - 2.0 ** 9 / 3.0 ** 5 / b.V ** 2


def el_residual_with_sign(res: MinimizeResult, flip_sign: bool) -> float:
    '''Recomputes the relative residual of the result, optionally with
    the sign of the surface term flipped.'''
    flow = _Flow(res.target_volume, FlowConfig(kind=res.kind), 1.0)
    if res.kind.tag == enums.SurfaceTag.LARGE_SLOPE:
        flow.set_eps(max(res.eps_tv, 1e-12))
    state = _State(res.profile, res.solution, res.breakdown.total)
    return flow.diagnostics(state, flip_sign).residual
