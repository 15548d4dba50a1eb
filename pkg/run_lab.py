import argparse
import logging
import sys

from config.config import Config, load_config_file, merge_config
from qigeom.api.emit import CSV_COLUMNS, emit
from qigeom.api.experiments import exit_status, run
from qigeom.utils.errors import ConfigError, LabError

logger = logging.getLogger('run_lab')

COMMAND_HELP = {
    'duality': 'duality defect of a metric for the +-alpha connections',
    'transport-duality': 'g(tau^alpha Y, tau^-alpha Z) along a curve on the positive cone',
    'potential': 'Hessian of the potential against the WYD metric in affine coordinates',
    'uniqueness-scan': 'duality defects of WYD, built-in, perturbed and scaled metrics',
    'monotonicity': 'Monte-Carlo contraction of a metric under random channels',
    'flatness': 'flatness of the cone connections and path dependence on the states',
    'convexity-failure': 'nabla^alpha against the mixture of the +-1 connections',
    'entropy-projection': 'e-projection onto random Gibbs families and the entropy Taylor check',
    'metric-table': 'kernel/direct equivalence, ordering and classical reduction of the metrics'
}

EPILOG = f"""
CSV columns: {', '.join(CSV_COLUMNS)}.
  value is the measured defect, residual or margin; the case passes when
  "value comparison threshold" holds. inconclusive marks values between the
  duality tolerance and the falsification gap, or failed iterations.

Exit codes: 0 pass, 1 failure, 2 usage error, 3 numerically inconclusive.

Example usage:
  python run_lab.py duality --alpha 0.5 --metric wyd --dim 2 --seed 7
  python run_lab.py duality --alpha 0 --metric bures --dim 2 --seed 7
  python run_lab.py monotonicity --metric wyd --alpha 0.4 --trials 1000 --seed 7
  python run_lab.py metric-table --alpha -0.9 --alpha 0.9 --format csv --output table.csv
"""


def _add_options(parser):
    parser.add_argument('--alpha', dest='alphas', type=float, action='append',
                        help='connection parameter in [-1, 1]; repeat for several (default: 0.5)')
    parser.add_argument('--metric', dest='metrics', action='append',
                        help='wyd, wyd:<p>, bkm, bures or rld; repeat for several (default: wyd)')
    parser.add_argument('--dim', type=int, help='matrix dimension N')
    parser.add_argument('--family', help='auto, all, qubit, qutrit, qubit-hat, qutrit-hat or diagonal')
    parser.add_argument('--seed', type=int, help=f'64-bit seed (default: {Config.DEFAULT_SEED})')
    parser.add_argument('--trials', type=int, help='samples, grid points or instances, per command')
    parser.add_argument('--steps', type=int, help=f'transport steps (default: {Config.TRANSPORT_STEPS})')
    parser.add_argument('--tol', type=float, help=f'duality tolerance (default: {Config.DUALITY_TOL:g})')
    parser.add_argument('--gap', type=float, help=f'falsification gap (default: {Config.FALSIFICATION_GAP:g})')
    parser.add_argument('--manifold', choices=('M', 'hat'), help='state manifold or positive cone (default: M)')
    parser.add_argument('--output', help='output file, relative to QIGEOM_OUTPUT_DIR (default: stdout)')
    parser.add_argument('--format', choices=Config.OUTPUT_FORMATS, help='jsonl or csv (default: jsonl)')
    parser.add_argument('--workers', type=int, help='threads for independent cases (default: 1)')
    parser.add_argument('--config', help='flat key = value config file; flags take precedence')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for INFO, -vv for DEBUG')


def build_parser():
    parser = argparse.ArgumentParser(
        description='Quantum information geometry laboratory',
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True
    for name in Config.COMMANDS:
        sub = subparsers.add_parser(name, help=COMMAND_HELP[name], description=COMMAND_HELP[name],
                                    epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
        _add_options(sub)
    return parser


def _configure_logging(verbosity):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def _summary(record):
    for case in record.cases:
        status = 'INCONCLUSIVE' if case['inconclusive'] else ('PASS' if case['passed'] else 'FAIL')
        print(f"  [{status}] #{case['case']} {case['label']} {case['metric']} alpha={case['alpha']:g} "
              f"{case['family']}: {case['value']:.6g} {case['comparison']} {case['threshold']:g}", file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return Config.EXIT_CODES['USAGE'] if exc.code else Config.EXIT_CODES['PASS']
    _configure_logging(args.verbose)

    cli_values = {
        key: getattr(args, key)
        for key in ('alphas', 'metrics', 'dim', 'family', 'seed', 'trials', 'steps', 'tol', 'gap',
                    'manifold', 'output', 'format', 'workers')
    }
    for key in ('alphas', 'metrics'):
        if cli_values[key] is not None:
            cli_values[key] = tuple(cli_values[key])

    try:
        file_values = load_config_file(args.config) if args.config else None
        config = merge_config(args.command, cli_values, file_values)
        record = run(config)
        emit(record, config.format, config.output)
    except ConfigError as exc:
        print(f'usage error: {exc}', file=sys.stderr)
        return Config.EXIT_CODES['USAGE']
    except LabError as exc:
        logger.error('%s failed: %s', args.command, exc)
        return Config.EXIT_CODES['USAGE']

    _summary(record)
    return exit_status(record)


if __name__ == '__main__':
    sys.exit(main())
