'''Unit tests for optimizer'''

import math

from dataclasses import replace

import numpy as np
import pytest

from .. import enums
from .. import errors
from .. import optimizer
from .. import profile
from ..types import Resolution

COARSE = Resolution(cells=64, layers=8,
                    backend=enums.SolverBackend.DIRECT)


def _coarse_flow(**kwargs) -> optimizer.FlowConfig:
    args = {'max_iters': 300, 'restarts': 1, 'resolution': COARSE}
    args.update(kwargs)
    return optimizer.FlowConfig(**args)


@pytest.fixture(scope='module', name='island')
def fixture_island():
    '''Short run at V = 200 on a coarse mesh.'''
    return optimizer.minimize(200.0, _coarse_flow())


def _nonincreasing(values):
    return all(b <= a for a, b in zip(values, values[1:]))


def test_default_penalty():
    '''Test default penalty weight'''
    assert optimizer.default_penalty(0.5) == 4.0
    assert optimizer.default_penalty(1.0) == 4.0
    assert optimizer.default_penalty(32.0) == pytest.approx(2.0)


def test_flow_config_validation():
    '''Test FlowConfig rejects invalid values'''
    for kwargs in ({'tau': 0.0}, {'max_iters': 0}, {'tol_residual': 0.0},
                   {'penalty_mu': -1.0}, {'restarts': 0},
                   {'plateau_iters': 0}, {'eps_start': 1e-4,
                                          'eps_final': 1e-3}):
        with pytest.raises(errors.InvalidParameter):
            optimizer.FlowConfig(**kwargs)


def test_default_window():
    '''Test automatic window sizes'''
    small = optimizer.default_window(100.0, profile.SMALL_SLOPE, 64)
    assert small.length == pytest.approx(8.0 * 100.0 ** 0.4)
    assert small.x_min == -small.x_max
    large = optimizer.default_window(1000.0, profile.LARGE_SLOPE, 64)
    assert large.length == pytest.approx(80.0)
    assert optimizer.default_window(0.01, profile.EXACT, 64).length == 16.0
    assert optimizer.default_window(2.0, profile.SMALL_SLOPE, 64).length \
        == 16.0


def test_eps_schedule():
    '''Test smoothings of the total variation continuation'''
    assert optimizer.eps_schedule(0.1, 0.1) == [0.1]
    levels = optimizer.eps_schedule(0.8, 0.15)
    assert levels == pytest.approx([0.8, 0.4, 0.2, 0.15])
    assert len(optimizer.eps_schedule(0.1, 1e-4)) == 11


def test_project():
    '''Test projection onto nonnegative profiles of given volume'''
    h = np.array([1.0, -0.5, 2.0, 3.0, -1.0, 1.0, 4.0])
    projected = optimizer.project(h, 0.5, 3.0)
    assert projected[0] == 0.0 and projected[-1] == 0.0
    assert projected.min() >= 0.0
    assert 0.5 * projected.sum() == pytest.approx(3.0, rel=1e-12)
    assert optimizer.project(-np.abs(h), 0.5, 3.0) is None
    assert optimizer.project(np.zeros(5), 0.5, 3.0) is None
    # Feasible heights are left unchanged
    np.testing.assert_allclose(optimizer.project(projected, 0.5, 3.0),
                               projected, rtol=1e-14)


def test_support_helpers():
    '''Test support measures of a two bump profile'''
    grid = profile.Grid1D(0.0, 10.0, 10)
    p = profile.Profile(grid, [0, 0, 1, 2, 0, 0, 0, 3, 0, 0, 0])
    assert optimizer.connectedness(p) == 2
    assert optimizer.support_length(p) == pytest.approx(5.0)
    # Edge cells slopes are 1, 2, 3 and 3
    assert optimizer.contact_slope(p) == pytest.approx(3.0)
    assert not optimizer.is_wetting(p)
    assert optimizer.is_wetting(profile.flat_layer(grid, 1.0))
    empty = profile.zero(grid)
    assert optimizer.connectedness(empty) == 0
    assert optimizer.contact_slope(empty) == 0.0


def test_el_diagnostics():
    '''Test multiplier and residual of a constant gradient'''
    p = profile.parabola(profile.Grid1D.centered(4.0, 40), 1.0, 1.0)
    diag = optimizer.el_diagnostics(p, np.full(41, 0.7))
    assert diag.lam == pytest.approx(0.7)
    assert diag.residual == pytest.approx(0.0, abs=1e-12)
    noisy = np.full(41, 0.7)
    noisy[20] = 1.7
    assert optimizer.el_diagnostics(p, noisy).residual > 0.0
    mask = p.support_mask()
    mask[[0, -1]] = False
    weights = p.heights[mask]
    assert optimizer.el_diagnostics(p, noisy).lam == pytest.approx(
        float(np.sum(weights * noisy[mask]) / np.sum(weights)))
    empty = profile.zero(p.grid)
    assert optimizer.el_diagnostics(empty, np.ones(41)).residual == math.inf


def test_initial_profiles():
    '''Test starts of the minimizer'''
    grid = profile.Grid1D.centered(20.0, 100)
    starts = optimizer.initial_profiles(5.0, grid, profile.SMALL_SLOPE, 6, 3)
    assert len(starts) == 6
    for p in starts:
        assert profile.volume(p) == pytest.approx(5.0, rel=1e-12)
    # The flat layer is the third start
    assert optimizer.is_wetting(starts[2])
    again = optimizer.initial_profiles(5.0, grid, profile.SMALL_SLOPE, 6, 3)
    np.testing.assert_array_equal(starts[5].heights, again[5].heights)
    other = optimizer.initial_profiles(5.0, grid, profile.SMALL_SLOPE, 6, 4)
    assert not np.array_equal(starts[5].heights, other[5].heights)


def test_minimize_validation():
    '''Test minimize rejects bad volumes'''
    for vol in (0.0, -1.0, math.nan, math.inf):
        with pytest.raises(errors.InvalidParameter):
            optimizer.minimize(vol, _coarse_flow())


def test_minimize_island(island):
    '''Test invariants of a short minimization'''
    p = island.profile
    assert profile.volume(p) == pytest.approx(200.0, rel=1e-9)
    assert p.heights.min() >= 0.0
    assert _nonincreasing(island.history)
    assert island.history[-1] < island.history[0]
    assert island.breakdown.total == pytest.approx(
        island.breakdown.E + island.breakdown.S)
    assert island.breakdown.total == pytest.approx(island.history[-1])
    assert not island.wetting
    assert island.kind == profile.SMALL_SLOPE
    assert island.iterations <= 300
    assert island.converged == (island.el_residual <= 0.05)


def test_result_dict(island):
    '''Test result JSON fields'''
    data = island.to_dict()
    assert sorted(data) == sorted([
        'V', 'kind', 'E', 'S', 'total', 'beta', 'lambda', 'el_residual',
        'contact_slope', 'support_length', 'iterations', 'converged', 'seed',
        'volume_mode', 'wetting', 'max_height'])
    assert data['kind'] == 'small-slope'
    assert data['volume_mode'] == 'projection'
    assert data['beta'] == pytest.approx(data['total'] / 200.0, rel=1e-9)


def test_derived_quantities(island):
    '''Test diagnostics derived from a result'''
    b = island.breakdown
    assert optimizer.derivative_estimate(island) \
        == pytest.approx((b.E + 0.5 * b.S) / b.V)
    assert optimizer.el_residual_with_sign(island, False) \
        == pytest.approx(island.el_residual)
    first, second = optimizer.lambda_upper_bounds(island)
    assert first == pytest.approx(1.0 - 0.5 * b.S / b.V)
    assert second == pytest.approx(1.0 - 512.0 / 243.0 / b.V ** 2)
    assert optimizer.lagrange_identity_gap(replace(
        island, lam=(b.total - 0.5 * b.S) / b.V)) == pytest.approx(0.0)


def test_support_bound_check(island):
    '''Test support bound regime'''
    with pytest.raises(errors.NotApplicable):
        optimizer.support_bound_check(replace(island, lam=1.5))
    with pytest.raises(errors.NotApplicable):
        optimizer.support_bound_check(replace(island, wetting=True))
    tight = replace(island, lam=0.5, wetting=False,
                    support_length=island.breakdown.S)
    assert optimizer.support_bound_check(tight, slack=0.0)
    assert not optimizer.support_bound_check(
        replace(tight, support_length=2.0 * island.breakdown.S))


def test_explicit_scheme():
    '''Test explicit steps keep the volume and decrease the energy'''
    res = optimizer.minimize(5.0, _coarse_flow(
        scheme=enums.StepScheme.EXPLICIT, max_iters=40))
    assert profile.volume(res.profile) == pytest.approx(5.0, rel=1e-9)
    assert _nonincreasing(res.history)


def test_penalty_mode():
    '''Test penalized volume stays close to the target'''
    res = optimizer.minimize(5.0, _coarse_flow(
        volume_mode=enums.VolumeMode.PENALTY, max_iters=100))
    assert res.volume_mode == enums.VolumeMode.PENALTY
    assert _nonincreasing(res.history)
    assert profile.volume(res.profile) == pytest.approx(5.0, rel=0.1)


def test_large_slope_reaches_final_smoothing():
    '''Test the continuation ends at the final smoothing on a short run'''
    cfg = _coarse_flow(kind=profile.LARGE_SLOPE, max_iters=40)
    res = optimizer.minimize(5.0, cfg)
    start = optimizer.initial_profiles(
        5.0, optimizer.default_window(5.0, cfg.kind, COARSE.cells),
        cfg.kind, 1, 0)[0]
    slope = 2.0 * profile.sup_norm(start) / optimizer.support_length(start)
    assert res.eps_tv == pytest.approx(cfg.eps_final * slope, rel=1e-9)
    assert res.iterations <= 40


@pytest.mark.slow
def test_minimize_converges():
    '''Test converged small-slope island at V = 100'''
    res = optimizer.minimize(100.0, optimizer.FlowConfig(
        max_iters=2000, restarts=1,
        resolution=Resolution(cells=128, layers=12)))
    assert res.converged
    assert res.el_residual <= 0.05
    assert optimizer.connectedness(res.profile) == 1
    assert not res.wetting
    assert 0.0 < res.lam < 1.0
    assert optimizer.lagrange_identity_gap(res) <= 0.05
    assert optimizer.support_bound_check(res)


@pytest.mark.slow
@pytest.mark.parametrize('vol', [0.1, 0.5, 1.0, 2.0])
def test_minimize_wetting(vol):
    '''Test small volumes spread into a film of energy close to V'''
    res = optimizer.minimize(vol, _coarse_flow(restarts=3))
    assert res.wetting
    assert 0.98 <= res.breakdown.beta <= 1.02


@pytest.mark.slow
def test_minimize_island_regime():
    '''Test a large volume forms a single island cheaper than a film'''
    res = optimizer.minimize(200.0, _coarse_flow(restarts=3,
                                                 max_iters=2000))
    assert res.converged
    assert not res.wetting
    assert optimizer.connectedness(res.profile) == 1
    assert res.breakdown.beta <= 0.95


@pytest.mark.slow
def test_penalty_matches_projection():
    '''Test the exact penalty and the projection give the same optimum'''
    cfg = _coarse_flow(max_iters=2000)
    projected = optimizer.minimize(100.0, cfg)
    penalized = optimizer.minimize(100.0, replace(
        cfg, volume_mode=enums.VolumeMode.PENALTY))
    assert projected.converged and penalized.converged
    assert penalized.breakdown.total == pytest.approx(
        projected.breakdown.total, rel=0.02)


@pytest.mark.slow
def test_refinement():
    '''Test energy and contact slope at V = 1e4 under mesh refinement'''
    coarse = optimizer.minimize(1e4, optimizer.FlowConfig(
        restarts=1, resolution=Resolution(cells=128)))
    fine = optimizer.minimize(1e4, optimizer.FlowConfig(restarts=1))
    assert coarse.converged and fine.converged
    assert fine.breakdown.total <= coarse.breakdown.total * (1.0 + 1e-3)
    assert fine.contact_slope <= 0.1
    assert fine.contact_slope <= coarse.contact_slope * (1.0 + 1e-2)


@pytest.mark.slow
def test_minimize_large_slope():
    '''Test total variation continuation reaches the final smoothing'''
    res = optimizer.minimize(50.0, _coarse_flow(
        kind=profile.LARGE_SLOPE, max_iters=1500))
    assert res.kind == profile.LARGE_SLOPE
    assert res.eps_tv > 0.0
    assert res.converged
    assert profile.volume(res.profile) == pytest.approx(50.0, rel=1e-9)
    assert _nonincreasing(res.history)
