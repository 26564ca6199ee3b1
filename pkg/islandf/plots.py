'''Static SVG charts of profiles, sweeps and limit shapes.'''

from typing import Optional

import matplotlib
import numpy as np

from . import errors
from . import limits
from . import profile
from . import scaling
from . import utils

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402  pylint: disable=C0413


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)


def plot_profile(p: profile.Profile, path,
                 title: Optional[str] = None) -> None:
    '''Plots the profile over the substrate.'''
    fig, ax = plt.subplots(1, 1, figsize=(8, 3))
    ax.fill_between(p.x, 0.0, p.heights, alpha=0.4)
    ax.plot(p.x, p.heights)
    ax.axhline(0.0, color='k', linewidth=0.8)
    ax.set_xlabel('x')
    ax.set_ylabel('h')
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_sweep(sw: scaling.SweepResult, path) -> None:
    '''Plots total against V on log axes with the fitted line over the fit
    volumes and the explicit upper bounds.'''
    volumes = np.asarray(sw.volumes, dtype=float)
    totals = np.asarray(sw.totals, dtype=float)
    fig, ax = plt.subplots(1, 1, figsize=(6, 4.5))
    ax.loglog(volumes, totals, 'o', label='minimal energy')
    ax.loglog(volumes, volumes, ':', label='flat film')
    try:
        bounds = [scaling.upper_bound_2d(sw.kind, v) for v in volumes]
        ax.loglog(volumes, bounds, '--', label='construction')
    except errors.NotApplicable:
        pass
    mask = sw.fit_mask()
    if mask.sum() >= 2:
        fit = utils.loglog_fit(volumes[mask], totals[mask])
        ax.loglog(volumes[mask],
                  np.exp(fit.intercept) * volumes[mask] ** fit.slope, '-',
                  label=f'slope {fit.slope:.3f}')
    ax.set_xlabel('V')
    ax.set_ylabel('E + S')
    ax.set_title(str(sw.kind))
    ax.legend()
    _save(fig, path)


def plot_limit(p: profile.Profile, shape: limits.LimitShape, path) -> None:
    '''Plots a rescaled minimizer against the limit shape, both centered.
    '''
    shift = limits.center_of_mass(p)
    fig, ax = plt.subplots(1, 1, figsize=(6, 3))
    ax.plot(p.x - shift, p.heights, label='rescaled minimizer')
    x = np.linspace(p.grid.x_min - shift, p.grid.x_max - shift, 2001)
    ax.plot(x, shape.heights(x), '--', label=str(shape.kind))
    ax.set_xlabel('x')
    ax.legend()
    _save(fig, path)
