'''Unit tests for checks'''

from dataclasses import replace

import pytest

from .. import checks
from .. import errors

FAST = ['rescaling', 'interpolation', 'flux-identity', 'corrector-series',
        'stability', 'constructions', 'limit-shapes']


def test_names():
    '''Test suite order and descriptions'''
    names = checks.names()
    assert names[0] == 'rescaling'
    assert len(names) == len(set(names)) == 12
    for check in checks.CHECKS:
        assert check.description
        assert '\n' not in check.description


def test_unknown_check():
    '''Test unknown check names are rejected before running'''
    with pytest.raises(errors.InvalidParameter):
        checks.run_checks(checks.VerifyConfig(), ['rescaling', 'bogus'])


def test_fast_checks():
    '''Test checks that need no minimizer'''
    cfg = checks.VerifyConfig(samples=50)
    outcomes = checks.run_checks(cfg, FAST)
    assert [o.name for o in outcomes] == FAST
    for outcome in outcomes:
        assert outcome.passed, f'{outcome.name}: {outcome.detail}'


def test_failing_check(monkeypatch):
    '''Test library errors turn into failed checks'''
    def _raises(_):
        raise errors.EmptyFilm('nothing to mesh')

    monkeypatch.setattr(checks, 'CHECKS', [checks.Check('empty', _raises)])
    outcome, = checks.run_checks(checks.VerifyConfig())
    assert outcome == ('empty', False, 'EmptyFilm: nothing to mesh')


def test_context_caches_minimizers(monkeypatch):
    '''Test minimizers are computed once per kind and volume'''
    calls = []

    def _minimize(vol, flow):
        calls.append((vol, str(flow.kind)))
        return len(calls)

    monkeypatch.setattr(checks.optimizer, 'minimize', _minimize)
    ctx = checks.Context(checks.VerifyConfig(volume=7.0))
    first = ctx.minimizer(checks.profile.SMALL_SLOPE)
    assert ctx.minimizer(checks.profile.SMALL_SLOPE, 7.0) == first
    ctx.minimizer(checks.profile.LARGE_SLOPE)
    assert calls == [(7.0, 'small-slope'), (7.0, 'large-slope')]


@pytest.mark.slow
def test_full_suite():
    '''Test the whole suite passes with the default configuration'''
    for outcome in checks.run_checks(checks.VerifyConfig()):
        assert outcome.passed, f'{outcome.name}: {outcome.detail}'


@pytest.mark.slow
def test_flipped_sign_fails():
    '''Test the residual check catches a wrong sign of the surface term'''
    cfg = replace(checks.VerifyConfig(), flip_el_sign=True)
    outcome, = checks.run_checks(cfg, ['el-residual'])
    assert not outcome.passed
