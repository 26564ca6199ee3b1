'''Unit tests for scaling'''

import math

import numpy as np
import pytest

from .. import enums
from .. import errors
from .. import optimizer
from .. import profile
from .. import scaling
from .. import storage
from ..types import Resolution

VOLUMES = [1.0, 10.0, 100.0, 1000.0, 10000.0]


def _synthetic(**kwargs) -> scaling.SweepResult:
    '''Film energy up to V = 32, then 2 V^(4/5).'''
    totals = [min(v, 2.0 * v ** 0.8) for v in VOLUMES]
    return scaling.SweepResult(profile.SMALL_SLOPE, VOLUMES, totals,
                               **kwargs)


def _quick_flow() -> optimizer.FlowConfig:
    return optimizer.FlowConfig(
        max_iters=60, restarts=1,
        resolution=Resolution(cells=48, layers=6,
                              backend=enums.SolverBackend.DIRECT))


def test_sweep_result_validation():
    '''Test SweepResult rejects inconsistent data'''
    with pytest.raises(errors.InvalidInput):
        scaling.SweepResult(profile.SMALL_SLOPE, [], [])
    with pytest.raises(errors.InvalidInput):
        scaling.SweepResult(profile.SMALL_SLOPE, [2.0, 1.0], [1.0, 1.0])
    with pytest.raises(errors.InvalidInput):
        scaling.SweepResult(profile.SMALL_SLOPE, [1.0, 2.0], [1.0])
    with pytest.raises(errors.InvalidInput):
        _synthetic(lambdas=[0.5])


def test_fits():
    '''Test exponent fit and wetting threshold bracket'''
    sw = _synthetic()
    np.testing.assert_allclose(sw.betas[:2], 1.0)
    assert list(sw.island_mask()) == [False, False, True, True, True]
    assert list(sw.fit_mask()) == [False, False, False, True, True]
    assert sw.fitted_exponent == pytest.approx(0.8, rel=1e-9)
    vbar = sw.vbar_estimate
    assert vbar == (10.0, 100.0)
    assert vbar.midpoint == 55.0
    assert vbar.width == 90.0
    assert scaling.small_volume_limit(sw) == pytest.approx(1.0)


def test_unconverged_points_are_skipped():
    '''Test unconverged volumes are left out of the fits'''
    sw = _synthetic(converged=[True, True, False, True, False])
    assert list(sw.fit_mask()) == [False, False, False, True, False]
    assert math.isnan(sw.fitted_exponent)
    assert sw.vbar_estimate == (10.0, 1000.0)
    assert sw.to_dict()['unconverged'] == [100.0, 10000.0]


def test_no_island():
    '''Test sweeps entirely in the film regime'''
    sw = scaling.SweepResult(profile.SMALL_SLOPE, [1.0, 2.0], [1.0, 2.0])
    assert sw.vbar_estimate is None
    assert math.isnan(sw.fitted_exponent)
    bracket = scaling.VbarBracket(None, 4.0)
    assert bracket.midpoint == 2.0
    assert bracket.width == 4.0


def test_second_difference_gap():
    '''Test normalized second differences'''
    assert scaling.second_difference_gap([1.0, 2.0, 3.0],
                                         [1.0, 4.0, 9.0]) \
        == pytest.approx(0.5)
    assert scaling.second_difference_gap([1.0, 2.0, 4.0],
                                         [1.0, 2.0, 4.0]) \
        == pytest.approx(0.0, abs=1e-15)
    assert scaling.second_difference_gap([1.0, 4.0, 9.0],
                                         [1.0, 2.0, 3.0]) < 0.0
    with pytest.raises(errors.InvalidInput):
        scaling.second_difference_gap([1.0, 2.0], [1.0, 2.0])


def test_concavity_and_monotonicity():
    '''Test concavity and beta monotonicity of the synthetic sweep'''
    sw = _synthetic()
    assert scaling.concavity_gap(sw) <= 1e-12
    assert scaling.beta_monotonicity_gap(sw) == 0.0
    rising = scaling.SweepResult(profile.SMALL_SLOPE, [1.0, 2.0],
                                 [1.0, 3.0])
    assert scaling.beta_monotonicity_gap(rising) == pytest.approx(0.5)


def test_maxheight_law():
    '''Test maximal height exponent'''
    sw = _synthetic(maxheights=[0.5 * v ** 0.4 for v in VOLUMES])
    assert scaling.maxheight_law(sw) == pytest.approx(0.4, rel=1e-9)
    with pytest.raises(errors.InvalidInput):
        scaling.maxheight_law(_synthetic())


def test_explicit_bounds():
    '''Test explicit energies of films, tents and boxes'''
    assert scaling.flat_tent_total(1.0, 1.0) == 3.0
    assert scaling.wetting_threshold_lower() \
        == pytest.approx(32.0 / (9.0 * math.sqrt(3.0)))
    assert scaling.upper_bound_2d(profile.SMALL_SLOPE, 1.0) == 1.0
    assert scaling.upper_bound_2d(profile.SMALL_SLOPE, 1e6) \
        == pytest.approx(16.0 / 3.0 * 1e6 ** 0.8)
    assert scaling.upper_bound_2d(profile.LARGE_SLOPE, 1e6) \
        == pytest.approx(29.0 / 12.0 * 1e4)
    with pytest.raises(errors.NotApplicable):
        scaling.upper_bound_2d(profile.EXACT, 1.0)
    with pytest.raises(errors.InvalidParameter):
        scaling.flat_tent_total(0.0, 1.0)


def test_constructions():
    '''Test closed-form three dimensional constructions'''
    pyramid = scaling.construct_3d(enums.ConstructionKind.PYRAMID, 1.0)
    assert pyramid.total == pytest.approx(10.25, abs=1e-12)
    layer = scaling.construct_3d(enums.ConstructionKind.THIN_LAYER, 1.0,
                                 1e-6)
    assert layer.E_analytic == 2.0
    assert layer.total == pytest.approx(2.0, abs=1e-2)
    box = scaling.construct_3d(enums.ConstructionKind.BOX_LARGE_SLOPE, 16.0)
    assert box.L == 2.0 and box.H == 4.0
    assert box.E_analytic == pytest.approx(20.0 / 3.0)
    assert box.S_analytic == pytest.approx(32.0)
    for kind, eps in ((enums.ConstructionKind.PYRAMID, None),
                      (enums.ConstructionKind.THIN_LAYER, 0.01),
                      (enums.ConstructionKind.BOX_LARGE_SLOPE, None)):
        c = scaling.construct_3d(kind, 7.0, eps)
        assert c.volume() == pytest.approx(7.0, rel=1e-12)
        assert c.to_dict()['kind'] == str(kind)


def test_construction_validation():
    '''Test invalid construction parameters'''
    with pytest.raises(errors.InvalidParameter):
        scaling.construct_3d(enums.ConstructionKind.THIN_LAYER, 1.0)
    with pytest.raises(errors.InvalidParameter):
        scaling.construct_3d(enums.ConstructionKind.THIN_LAYER, 1.0, 2.0)
    with pytest.raises(errors.InvalidParameter):
        scaling.construct_3d(enums.ConstructionKind.PYRAMID, 1.0, 0.1)
    with pytest.raises(errors.InvalidParameter):
        scaling.construct_3d(enums.ConstructionKind.PYRAMID, -1.0)


def test_writers(tmp_path):
    '''Test sweep CSV and JSON files'''
    sw = _synthetic()
    csv = tmp_path / 'sweep.csv'
    scaling.write_sweep_csv(sw, csv)
    lines = csv.read_text().splitlines()
    assert lines[0] == scaling.SWEEP_CSV_HEADER
    assert len(lines) == len(VOLUMES) + 1
    assert 'nan' in lines[1]
    path = tmp_path / 'sweep.json'
    scaling.write_sweep_json(sw, path)
    data = storage.read_json(path)
    assert data['kind'] == 'small-slope'
    assert data['vbar']['upper'] == 100.0
    assert data['fit_volumes'] == [1000.0, 10000.0]
    assert data['maxheight_exponent'] is None


def test_sweep():
    '''Test a short sweep sorts volumes and keeps every point'''
    sw = scaling.sweep(profile.SMALL_SLOPE, [200.0, 0.5, 200.0],
                       _quick_flow())
    assert sw.volumes == [0.5, 200.0]
    assert len(sw.results) == 2
    assert sw.kind == profile.SMALL_SLOPE
    for res, vol in zip(sw.results, sw.volumes):
        assert res.target_volume == vol
    assert np.all(scaling.interpolation_margins(sw) >= -1e-12)
    with pytest.raises(errors.InvalidParameter):
        scaling.sweep(profile.SMALL_SLOPE, [1.0, -1.0], _quick_flow())
    with pytest.raises(errors.InvalidInput):
        scaling.interpolation_margins(_synthetic())


@pytest.mark.slow
def test_sweep_parallel():
    '''Test parallel sweeps give the serial results'''
    volumes = [1.0, 10.0, 100.0]
    serial = scaling.sweep(profile.SMALL_SLOPE, volumes, _quick_flow())
    parallel = scaling.sweep(profile.SMALL_SLOPE, volumes, _quick_flow(),
                             jobs=2)
    np.testing.assert_array_equal(serial.totals, parallel.totals)


@pytest.mark.slow
@pytest.mark.parametrize('kind, exponent', [
    (profile.SMALL_SLOPE, 0.8), (profile.LARGE_SLOPE, 2.0 / 3.0)])
def test_sweep_exponents(kind, exponent):
    '''Test the energy of converged sweeps grows with the island exponent'''
    sw = scaling.sweep(kind, np.logspace(2.0, 5.0, 7),
                       optimizer.FlowConfig(restarts=1), jobs=2)
    assert all(sw.converged_mask())
    assert sw.fitted_exponent == pytest.approx(exponent, abs=0.05)
    assert scaling.concavity_gap(sw) <= 0.02
