'''https://github.com/human3/islandf'''

import argparse
import dataclasses
import logging
import math
import sys

from dataclasses import dataclass
from typing import List
from typing import Optional
from typing import Sequence

import numpy as np

from . import __url__
from . import __version__
from . import checks
from . import elastic
from . import enums
from . import errors
from . import limits
from . import optimizer
from . import profile
from . import scaling
from . import storage
from .debug import LOG
from .types import Resolution

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

DEFAULT_TRUNCATIONS = (1.0, 2.0, 3.0)


def parse_volumes(text) -> List[float]:
    '''Parses a volume list: a JSON list, comma separated numbers, or
    `logspace:a:b:n` for n volumes from 10^a to 10^b.'''
    if isinstance(text, (list, tuple)):
        values = [float(v) for v in text]
    elif text.startswith('logspace:'):
        try:
            _, lo, hi, count = text.split(':')
            values = list(np.logspace(float(lo), float(hi), int(count)))
        except ValueError as ex:
            raise errors.InvalidParameter(
                f'bad volume range "{text}", expected logspace:a:b:n') from ex
    else:
        try:
            values = [float(v) for v in text.split(',') if v.strip()]
        except ValueError as ex:
            raise errors.InvalidParameter(f'bad volume list "{text}"') from ex
    if not values:
        raise errors.InvalidParameter('empty volume list')
    if any(not (math.isfinite(v) and v > 0.0) for v in values):
        raise errors.InvalidParameter('volumes must be positive')
    return [float(v) for v in values]


@dataclass(frozen=True)
class RunConfig:
    '''Everything a run depends on. It is embedded in the manifest of the
    run, so that equal configs reproduce equal results.'''
    # pylint: disable=too-many-instance-attributes
    command: str = 'solve'
    kind: str = 'small-slope'
    volume: float = 1e4
    volumes: Optional[List[float]] = None
    window: Optional[float] = None
    cells: int = 256
    layers: int = 24
    grading: float = 2.0
    backend: str = 'cg'
    solver_tol: float = 1e-12
    tol: float = 0.05
    max_iters: int = 3000
    restarts: int = 3
    seed: int = 0
    jobs: Optional[int] = None
    out: str = 'islandf-runs'
    volume_mode: str = 'projection'
    penalty_mu: Optional[float] = None
    scheme: str = 'semi-implicit'
    truncations: List[float] = dataclasses.field(
        default_factory=lambda: list(DEFAULT_TRUNCATIONS))
    corrector_fit: bool = False
    plot: bool = False
    only: Optional[List[str]] = None
    flip_el_sign: bool = False

    def __post_init__(self):
        if self.command not in [c.name.lower() for c in enums.Command]:
            raise errors.InvalidParameter(f'unknown command {self.command}')
        for name, enum in (('kind', enums.SurfaceTag),
                           ('backend', enums.SolverBackend),
                           ('volume_mode', enums.VolumeMode),
                           ('scheme', enums.StepScheme)):
            if getattr(self, name) not in enum.choices():
                raise errors.InvalidParameter(
                    f'{name} must be one of {", ".join(enum.choices())}')
        if not (math.isfinite(self.volume) and self.volume > 0.0):
            raise errors.InvalidParameter('volume must be positive')
        if self.window is not None and not self.window > 0.0:
            raise errors.InvalidParameter('window must be positive')
        if self.jobs is not None and self.jobs < 1:
            raise errors.InvalidParameter('jobs must be at least 1')

    def surface_kind(self) -> profile.SurfaceEnergyKind:
        '''Returns the surface energy of the run.'''
        return profile.SurfaceEnergyKind.from_str(self.kind)

    def resolution(self) -> Resolution:
        '''Returns the mesh and solver control.'''
        return Resolution(cells=self.cells, layers=self.layers,
                          grading=self.grading,
                          backend=enums.SolverBackend.from_str(self.backend),
                          tol=self.solver_tol)

    def flow(self) -> optimizer.FlowConfig:
        '''Returns the optimizer configuration.'''
        return optimizer.FlowConfig(
            kind=self.surface_kind(), tol_residual=self.tol,
            max_iters=self.max_iters, restarts=self.restarts,
            seed=self.seed,
            volume_mode=enums.VolumeMode.from_str(self.volume_mode),
            penalty_mu=self.penalty_mu,
            scheme=enums.StepScheme.from_str(self.scheme),
            resolution=self.resolution())

    def to_dict(self) -> dict:
        '''Returns the config as plain data.'''
        return dataclasses.asdict(self)


CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {'command'}

# Per command defaults, overridden by the config file and the flags.
COMMAND_DEFAULTS = {
    'verify': {'volume': 100.0, 'cells': 128, 'layers': 12, 'restarts': 1,
               'max_iters': 2000},
}


def load_config_file(path: str) -> dict:
    '''Reads a JSON config whose keys are long flag names with
    underscores.'''
    try:
        values = storage.read_json(path)
    except OSError as ex:
        raise errors.InvalidInput(f'cannot read config {path}: {ex}') from ex
    if not isinstance(values, dict):
        raise errors.InvalidInput(f'{path}: expected a JSON object')
    unknown = sorted(set(values) - CONFIG_KEYS)
    if unknown:
        raise errors.InvalidInput(
            f'{path}: unknown keys {", ".join(unknown)}')
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    '''Merges defaults, the config file and the flags, flags winning.'''
    values = dict(COMMAND_DEFAULTS.get(args.command, {}))
    if args.config:
        values.update(load_config_file(args.config))
    for key, value in vars(args).items():
        if key in CONFIG_KEYS and value is not None:
            values[key] = value
    if values.get('penalty_mu') is not None and 'volume_mode' not in values:
        values['volume_mode'] = str(enums.VolumeMode.PENALTY)
    for key in ('volumes', 'truncations'):
        if values.get(key) is not None:
            values[key] = parse_volumes(values[key])
    if isinstance(values.get('only'), str):
        values['only'] = [n for n in values['only'].split(',') if n]
    try:
        return RunConfig(command=args.command, **values)
    except TypeError as ex:
        raise errors.InvalidInput(f'bad config: {ex}') from ex


def _kind_choices() -> List[str]:
    return enums.SurfaceTag.choices()


def _add_common(parser: argparse.ArgumentParser) -> None:
    '''Flags shared by all commands. Defaults are None so that config file
    values are only overridden by flags actually given.'''
    parser.add_argument('--config', help='JSON file with default values')
    parser.add_argument('--kind', choices=_kind_choices(),
                        help='surface energy (default small-slope)')
    parser.add_argument('--cells', type=int,
                        help='cells of the window or strip (default 256)')
    parser.add_argument('--layers', type=int,
                        help='element layers per column (default 24)')
    parser.add_argument('--grading', type=float,
                        help='layer grading exponent (default 2)')
    parser.add_argument('--backend', choices=enums.SolverBackend.choices(),
                        help='linear solver (default cg)')
    parser.add_argument('--solver-tol', type=float,
                        help='linear solver tolerance (default 1e-12)')
    parser.add_argument('--tol', type=float,
                        help='relative Euler-Lagrange residual for '
                        'convergence (default 0.05)')
    parser.add_argument('--max-iters', type=int,
                        help='gradient flow steps per start (default 3000)')
    parser.add_argument('--restarts', type=int,
                        help='initial profiles per volume (default 3)')
    parser.add_argument('--seed', type=int,
                        help='seed of perturbed restarts (default 0)')
    parser.add_argument('--volume-mode', choices=enums.VolumeMode.choices(),
                        help='volume constraint (default projection)')
    parser.add_argument('--penalty-mu', type=float,
                        help='penalty weight, selects penalty mode')
    parser.add_argument('--scheme', choices=enums.StepScheme.choices(),
                        help='gradient flow steps (default semi-implicit)')
    parser.add_argument('--jobs', type=int,
                        help='worker processes (default: available cores)')
    parser.add_argument('--out', help='directory of run slots '
                        '(default islandf-runs)')
    parser.add_argument('--plot', action='store_true', default=None,
                        help='write SVG charts')
    parser.add_argument('--verbose', action='store_true',
                        help='log run milestones')
    parser.add_argument('--debug', action='store_true',
                        help='log every iteration')


def init_env() -> argparse.ArgumentParser:
    '''Initialize environment and return argument parser.'''
    parser = argparse.ArgumentParser(
        prog='islandf',
        description='Energy minimizing profiles of strained epitaxial '
        'films: minimizers, scaling laws, corrector constant, limit shapes '
        'and invariant checks.',
        epilog=f'More info at {__url__}')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', help='minimize at one volume')
    _add_common(solve)
    solve.add_argument('--volume', type=float, help='volume (default 1e4)')
    solve.add_argument('--window', type=float,
                       help='window width (default 8 V^(2/5), or '
                       '8 V^(1/3) for large slope, at least 16)')

    sweep = sub.add_parser('sweep', help='minimize over a volume list')
    _add_common(sweep)
    sweep.add_argument('--volumes', required=False,
                       help='comma separated volumes or logspace:a:b:n')

    corrector = sub.add_parser('corrector',
                               help='estimate the corrector constant')
    _add_common(corrector)
    corrector.add_argument('--truncations',
                           help='strip heights (default 1,2,3)')

    limit = sub.add_parser('limit', help='limit shapes and convergence')
    _add_common(limit)
    limit.add_argument('--volumes',
                       help='volumes of minimizers to compare with the '
                       'limit shape')
    limit.add_argument('--corrector-fit', action='store_true', default=None,
                       help='use the fitted corrector constant')
    limit.add_argument('--truncations',
                       help='strip heights of the corrector fit')

    verify = sub.add_parser('verify', help='run the invariant checks')
    _add_common(verify)
    verify.add_argument('--volume', type=float,
                        help='volume of the island minimizers '
                        '(default 100)')
    verify.add_argument('--only', help='comma separated check names')
    verify.add_argument('--list', action='store_true',
                        help='list the checks and exit')
    verify.add_argument('--flip-el-sign', action='store_true', default=None,
                        help='flip the surface term of the residual')
    return parser


def _configure_logging(args) -> None:
    level = logging.WARNING
    if args.verbose:
        level = logging.INFO
    if args.debug:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')


def _create_slot(cfg: RunConfig):
    store = storage.Store(cfg.out)
    slot = store.create(cfg.command, cfg.to_dict())
    LOG.info('writing to %s', slot)
    return slot


def _plots():
    # matplotlib is only loaded when charts are requested
    from . import plots  # pylint: disable=import-outside-toplevel
    return plots


def run_solve(cfg: RunConfig) -> int:
    '''Minimizes at one volume and writes result.json and profile.csv.'''
    kind = cfg.surface_kind()
    window = None
    if cfg.window is not None:
        window = profile.Grid1D.centered(cfg.window, cfg.cells)
    res = optimizer.minimize(cfg.volume, cfg.flow(), window)
    slot = _create_slot(cfg)
    storage.write_json(slot / 'result.json', res.to_dict())
    profile.write_csv(res.profile, slot / 'profile.csv')
    if cfg.plot:
        _plots().plot_profile(res.profile, slot / 'profile.svg',
                              f'{kind} V={cfg.volume:g}')
    b = res.breakdown
    print(f'{slot}: total={b.total:.8g} beta={b.beta:.6f} '
          f'lambda={res.lam:.6f} residual={res.el_residual:.3g} '
          f'wetting={res.wetting} converged={res.converged}')
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def run_sweep(cfg: RunConfig) -> int:
    '''Runs a volume sweep and writes sweep.csv and fit.json.'''
    if not cfg.volumes:
        raise errors.InvalidParameter('sweep needs --volumes')
    sw = scaling.sweep(cfg.surface_kind(), cfg.volumes, cfg.flow(),
                       jobs=cfg.jobs)
    slot = _create_slot(cfg)
    scaling.write_sweep_csv(sw, slot / 'sweep.csv')
    scaling.write_sweep_json(sw, slot / 'fit.json')
    if cfg.plot:
        _plots().plot_sweep(sw, slot / 'sweep.svg')
    vbar = sw.vbar_estimate
    print(f'{slot}: exponent={sw.fitted_exponent:.4f} vbar='
          f'{"not found" if vbar is None else f"{vbar.midpoint:g}"}')
    return EXIT_OK if all(sw.converged_mask()) else EXIT_NOT_CONVERGED


def run_corrector(cfg: RunConfig) -> int:
    '''Estimates C_W and writes corrector.json.'''
    result = elastic.corrector_cw(cfg.truncations, cfg.resolution())
    slot = _create_slot(cfg)
    storage.write_json(slot / 'corrector.json', {
        'truncations': result.truncation_heights,
        'energies': result.energies,
        'C_W': result.extrapolated,
        'error_estimate': result.error_estimate,
        'C_W_exact': elastic.CW_EXACT,
    })
    print(f'{slot}: C_W={result.extrapolated:.6f} '
          f'(+/- {result.error_estimate:.1e}, exact {elastic.CW_EXACT:.6f})')
    return EXIT_OK


def run_limit(cfg: RunConfig) -> int:
    '''Writes both limit shapes and, given volumes, the convergence of the
    rescaled minimizers.'''
    c_w = elastic.CW_EXACT
    if cfg.corrector_fit:
        c_w = elastic.corrector_cw(cfg.truncations,
                                   cfg.resolution()).extrapolated
    slot = _create_slot(cfg)
    for kind in enums.LimitKind:
        shape = limits.limit_minimizer(kind, c_w)
        limits.write_shape_json(shape, slot / f'limit-{kind}.json')
        print(f'{kind}: ell={shape.ell:.6f} energy={shape.energy:.6f}')
    if not cfg.volumes:
        return EXIT_OK
    sw = scaling.sweep(cfg.surface_kind(), cfg.volumes, cfg.flow(),
                       jobs=cfg.jobs)
    islands = [r for r in sw.results if r.converged and not r.wetting]
    if not islands:
        LOG.warning('no converged island among the volumes')
        return EXIT_NOT_CONVERGED
    record = limits.measure_convergence(islands, c_w)
    limits.write_convergence_csv(record, slot / 'convergence.csv')
    if len(record.volumes) >= 4:
        fit = limits.decay_fit(record)
        storage.write_json(slot / 'decay.json', fit._asdict())
        print(f'decay: C0={fit.c0:.4g} C1={fit.c1:.4g} '
              f'monotone={fit.monotone}')
    if cfg.plot:
        shape = limits.limit_minimizer(limits.limit_kind(record.kind), c_w)
        _plots().plot_limit(limits.rescaled_profile(islands[-1]), shape,
                            slot / 'limit.svg')
    return EXIT_OK if all(sw.converged_mask()) else EXIT_NOT_CONVERGED


def run_verify(cfg: RunConfig) -> int:
    '''Runs the checks and prints one line per check.'''
    vcfg = checks.VerifyConfig(
        volume=cfg.volume, flow=cfg.flow(), seed=cfg.seed,
        flip_el_sign=cfg.flip_el_sign)
    outcomes = checks.run_checks(vcfg, cfg.only)
    slot = _create_slot(cfg)
    storage.write_json(slot / 'verify.json',
                       [o._asdict() for o in outcomes])
    for outcome in outcomes:
        status = 'PASS' if outcome.passed else 'FAIL'
        print(f'{status} {outcome.name}: {outcome.detail}')
    return EXIT_OK if all(o.passed for o in outcomes) \
        else EXIT_NOT_CONVERGED


COMMANDS = {
    enums.Command.SOLVE: run_solve,
    enums.Command.SWEEP: run_sweep,
    enums.Command.CORRECTOR: run_corrector,
    enums.Command.LIMIT: run_limit,
    enums.Command.VERIFY: run_verify,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    '''Runs the command line and returns the exit code.'''
    parser = init_env()
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return EXIT_OK if ex.code == 0 else EXIT_ERROR
    _configure_logging(args)
    if args.command == 'verify' and args.list:
        for check in checks.CHECKS:
            print(f'{check.name}: {check.description}')
        return EXIT_OK
    try:
        cfg = build_config(args)
        return COMMANDS[enums.Command[cfg.command.upper()]](cfg)
    except (errors.IslandError, OSError) as ex:
        print(f'islandf: error: {ex}', file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    '''Application entry point.'''
    sys.exit(run())


if __name__ == '__main__':  # pragma: no cover
    main()
