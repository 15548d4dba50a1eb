"""Experiment commands.

Every command turns an ExperimentConfig into a list of independent jobs.
Each job owns a generator spawned from the config seed, so results do not
depend on how jobs are scheduled; run() evaluates the jobs, optionally on a
thread pool, and numbers the resulting case rows in job order.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from functools import partial

import numpy as np

from config.config import Config
from qigeom import __version__
from qigeom.models.models import ExperimentRecord, GibbsFamily, TangentVector
from qigeom.geometry.connections import flatness_check, holonomy_gap, polygon_curve, segment_curve
from qigeom.geometry.manifold import affine_coordinates, affine_family, family_point
from qigeom.geometry.metrics import (
    bkm_direct, bures_function, builtin_functions, function_by_name, metric_eval, monotonicity_check,
    rld_function, wyd_direct
)
from qigeom.lab.duality_lab import (
    classify, convexity_failure_check, dual_coordinate_check, dual_function, duality_defect,
    entropy_projection_demo, potential_check, relative_entropy_taylor_check, trace_identity_check,
    transport_duality_check, uniqueness_scan
)
from qigeom.utils.errors import ConfigError, LabError
from qigeom.utils.helpers import (
    DOCUMENTED_FAMILIES, PATH_DETOUR, PATH_END, PATH_START, SIGMA_X, SIGMA_Y, SIGMA_Z, WITNESS_POINTS,
    bloch_family, bloch_weight_family, diagonal_family, documented_family, hermitian_basis, parameter_grid,
    random_channel, random_hermitian, random_partial_trace_channel, random_state, random_tangent, random_weight,
    sample_parameters, spawn_rngs
)

logger = logging.getLogger(__name__)

STATUS = Config.CASE_STATUS
COMMANDS = {}

FAMILY_BY_DIM = {2: 'qubit', 3: 'qutrit'}
CHANNEL_KINDS = ('depolarizing', 'stinespring', 'partial-trace')
WITNESS_CURVE = ((0.5, 0.0, 0.0, 0.0), (0.5, 0.0, 0.0, 0.3))


def command(name):
    def register(builder):
        COMMANDS[name] = builder
        return builder
    return register


# Case rows

def _compare(value, threshold, comparison):
    if np.isnan(value):
        return False
    return value <= threshold if comparison == '<=' else value >= threshold


def _case(label, value, threshold, comparison, metric='', alpha=float('nan'), family='',
          passed=None, inconclusive=False, details=None):
    value = float(value)
    if passed is None:
        passed = _compare(value, threshold, comparison)
    return {
        'case': None,
        'command': None,
        'label': label,
        'metric': metric,
        'alpha': float(alpha),
        'family': family,
        'value': value,
        'threshold': float(threshold),
        'comparison': comparison,
        'passed': bool(passed) and not inconclusive,
        'inconclusive': bool(inconclusive),
        'details': details or {}
    }


def _verdict_case(label, value, expect_dual, tol, gap, **fields):
    status = classify(value, expect_dual, tol, gap)
    threshold, comparison = (tol, '<=') if expect_dual else (gap, '>=')
    return _case(label, value, threshold, comparison, passed=status == STATUS['PASS'],
                 inconclusive=status == STATUS['INCONCLUSIVE'], **fields)


# Config resolution

def _function(name, alpha):
    try:
        return function_by_name(name, alpha)
    except LabError as exc:
        raise ConfigError('metrics', str(exc))


def _expect_dual(f, alpha):
    return f.name == dual_function(alpha).name


def _family_names(config):
    if config.family == 'auto':
        dim = config.dim or 2
        if dim not in FAMILY_BY_DIM:
            raise ConfigError('dim', f'documented families exist for dim 2 and 3, got {dim}')
        names = [FAMILY_BY_DIM[dim]]
    elif config.family == 'all':
        names = list(FAMILY_BY_DIM.values())
    elif config.family in DOCUMENTED_FAMILIES:
        names = [config.family]
    else:
        raise ConfigError('family', f'unknown family {config.family!r}; expected auto, all or one of '
                                    f'{sorted(DOCUMENTED_FAMILIES)}')
    for name in names:
        if config.manifold == 'M' and not documented_family(name, 'M').on_states:
            raise ConfigError('family', f'{name} is not a family of states; use --manifold hat')
    return names


def _open_alphas(config):
    for alpha in config.alphas:
        if not -1 < alpha < 1:
            raise ConfigError('alphas', f'{config.command} needs alpha in (-1, 1), got {alpha}')
    return config.alphas


def _bind(job, config, specs):
    rngs = spawn_rngs(config.seed, len(specs))
    return [partial(job, config, spec, rng) for spec, rng in zip(specs, rngs)]


# Commands

def _duality_job(config, spec, rng):
    alpha, metric, name = spec
    f = _function(metric, alpha)
    family = documented_family(name, config.manifold)
    grid = parameter_grid(family.name, rng, config.trials or Config.GRID_POINTS)
    report = duality_defect(family, grid, f, alpha, config.manifold, seed=config.seed)
    expect_dual = _expect_dual(f, alpha)
    details = {
        'dual': report.defect <= config.tol,
        'expect_dual': expect_dual,
        'manifold': config.manifold,
        'grid_points': len(grid)
    }
    return [_verdict_case('duality-defect', report.defect, expect_dual, config.tol, config.gap,
                          metric=f.name, alpha=alpha, family=family.name, details=details)]


@command('duality')
def duality_jobs(config):
    names = _family_names(config)
    specs = [(alpha, metric, name) for alpha in config.alphas for metric in config.metrics for name in names]
    for alpha, metric, _ in specs:
        _function(metric, alpha)
    return _bind(_duality_job, config, specs)


def _transport_duality_job(config, spec, rng):
    alpha, metric = spec
    f = _function(metric, alpha)
    expect_dual = _expect_dual(f, alpha)
    family = bloch_weight_family()
    curves = [('witness-curve', segment_curve(family, *WITNESS_CURVE, config.steps, 'witness'), SIGMA_X, SIGMA_X)]
    if expect_dual:
        start, end = sample_parameters(family.name, rng, 2)
        curves.append(('random-curve', segment_curve(family, start, end, config.steps, 'random'),
                       random_hermitian(2, rng), random_hermitian(2, rng)))

    cases = []
    for label, curve, y, z in curves:
        base = family_point(family, curve.theta(0.0)).as_weight()
        report = transport_duality_check(curve, f, alpha, TangentVector(base, y), TangentVector(base, z))
        cases.append(_verdict_case(label, report.deviation, expect_dual, Config.TRANSPORT_DUALITY_TOL,
                                   Config.TRANSPORT_FALSIFICATION_GAP, metric=f.name, alpha=alpha,
                                   family=family.name, details=report.serialize()))
    return cases


@command('transport-duality')
def transport_duality_jobs(config):
    if config.manifold != 'hat':
        logger.info('transport-duality runs on the positive cone, where transport is exact')
    specs = [(alpha, metric) for alpha in config.alphas for metric in config.metrics]
    for alpha, metric in specs:
        _function(metric, alpha)
    return _bind(_transport_duality_job, config, specs)


def _potential_job(config, spec, rng):
    alpha = spec
    n = config.dim or 2
    basis = hermitian_basis(n)
    xi = affine_coordinates(random_weight(n, rng), alpha, basis)
    seed = int(rng.integers(2 ** 32))
    family = f'affine:{alpha:g}'
    metric = dual_function(alpha).name

    report = potential_check(alpha, basis, xi, seed)
    coordinates = dual_coordinate_check(alpha, basis, [xi], seed)
    identity = trace_identity_check(alpha, basis, xi, 1, 1)
    identity_scale = max(1.0, abs(identity['full_rhs']))
    fields = {'metric': metric, 'alpha': alpha, 'family': family}
    return [
        _case('hessian', report.residual, Config.HESSIAN_TOL, '<=', details=report.serialize(), **fields),
        _case('affine-relation', report.affine_residual, Config.AFFINE_TOL, '<=', **fields),
        _case('jacobian', coordinates.jacobian_residual, Config.JACOBIAN_TOL, '<=',
              details=coordinates.serialize(), **fields),
        _case('closed-form-legendre', coordinates.closed_form_residual, Config.LEGENDRE_TOL, '<=', **fields),
        _case('numeric-legendre', coordinates.legendre_residual, Config.LEGENDRE_TOL, '<=', **fields),
        _case('trace-identity', identity['full_residual'] / identity_scale, Config.EQUIVALENCE_TOL, '<=',
              details=identity, **fields)
    ]


@command('potential')
def potential_jobs(config):
    return _bind(_potential_job, config, list(_open_alphas(config)))


def _uniqueness_job(config, spec, rng):
    alpha = spec
    count = config.trials or Config.GRID_POINTS
    ensemble = []
    for name in FAMILY_BY_DIM.values():
        family = documented_family(name, config.manifold)
        ensemble.append((family, parameter_grid(family.name, rng, count)))
    result = uniqueness_scan(alpha, ensemble, config.tol, config.gap, manifold=config.manifold)

    families = ','.join(member.name for member, _ in ensemble)
    fields = {'alpha': alpha, 'family': families}
    cases = []
    for entry in result.entries:
        label = f'{entry["role"]}:{entry["name"]}'
        if entry['role'] == 'limit':
            cases.append(_case(label, entry['defect'], entry['threshold'], '<=', metric=entry['name'],
                               details=entry, **fields))
        else:
            cases.append(_verdict_case(label, entry['defect'], entry['expect_dual'], config.tol, config.gap,
                                       metric=entry['name'], details=entry, **fields))
    rivals = [entry['defect'] for entry in result.entries if entry['role'] in ('builtin', 'perturbed')]
    wyd = result.wyd_entry
    cases.append(_case('wyd-minimal', wyd['defect'], min(rivals, default=float('inf')), '<=', metric=wyd['name'],
                       alpha=alpha, family=families, passed=result.wyd_minimal))
    return cases


@command('uniqueness-scan')
def uniqueness_jobs(config):
    return _bind(_uniqueness_job, config, list(config.alphas))


def _monotonicity_job(config, spec, rng):
    alpha, metric = spec
    f = _function(metric, alpha)
    n = config.dim or 2
    trials = config.trials or Config.MONOTONICITY_TRIALS
    reports = {kind: [] for kind in CHANNEL_KINDS}
    for trial in range(trials):
        kind = CHANNEL_KINDS[trial % len(CHANNEL_KINDS)]
        if kind == 'partial-trace':
            size = 2 * n
            channel = random_partial_trace_channel(n, 2, rng)
        else:
            size = n
            channel = random_channel(n, rng, kind)
        rho = random_state(size, rng)
        tangent = random_tangent(size, rng)
        reports[kind].append(monotonicity_check(f, rho, tangent, channel))

    everything = [report for batch in reports.values() for report in batch]
    conclusive = [report for report in everything if not report.inconclusive]
    min_margin = min((report.margin for report in conclusive), default=float('nan'))
    depolarizing = [report for report in reports['depolarizing'] if not report.inconclusive]
    strict = [report for report in depolarizing if report.margin > Config.STRICT_MARGIN * max(1.0, report.rhs)]
    fraction = len(strict) / len(depolarizing) if depolarizing else float('nan')
    details = {
        'trials': trials,
        'dim': n,
        'regularized': sum(report.regularized for report in everything),
        'inconclusive_trials': len(everything) - len(conclusive),
        'min_margin_by_kind': {kind: min((r.margin for r in batch if not r.inconclusive), default=None)
                               for kind, batch in reports.items()}
    }
    inconclusive = len(conclusive) < len(everything)
    if inconclusive:
        logger.warning('%s: %d monotonicity trials were inconclusive', f.name, details['inconclusive_trials'])
    fields = {'metric': f.name, 'alpha': alpha, 'family': f'random:{n}'}
    return [
        _case('min-margin', min_margin, -Config.MONOTONICITY_SLACK, '>=', inconclusive=inconclusive,
              details=details, **fields),
        _case('depolarizing-strict-fraction', fraction, Config.STRICT_FRACTION, '>=', **fields)
    ]


@command('monotonicity')
def monotonicity_jobs(config):
    specs = [(alpha, metric) for alpha in config.alphas for metric in config.metrics]
    for alpha, metric in specs:
        _function(metric, alpha)
    return _bind(_monotonicity_job, config, specs)


def _flatness_job(config, spec, rng):
    alpha = spec
    n = config.dim or 2
    basis = hermitian_basis(n)
    xi = affine_coordinates(random_weight(n, rng), alpha, basis)
    family = affine_family(alpha, basis, name=f'affine:{alpha:g}')
    report = flatness_check(alpha, family, xi)
    cases = [_case('affine-flatness', report['max_norm'], Config.FLATNESS_TOL, '<=', alpha=alpha,
                   family=family.name, details=report)]

    # +-1 transports on M are flat, every other alpha is curved
    if abs(alpha) < 1:
        bloch = bloch_family()
        start = family_point(bloch, PATH_START)
        v = TangentVector(start, SIGMA_X + 2 * SIGMA_Y + 3 * SIGMA_Z)
        straight = segment_curve(bloch, PATH_START, PATH_END, config.steps, 'straight')
        detour = polygon_curve(bloch, [PATH_START, PATH_DETOUR, PATH_END], config.steps, 'detour')
        gap = holonomy_gap(straight, detour, v, alpha)
        cases.append(_case('path-dependence', gap, Config.PATH_DEPENDENCE_GAP, '>=', alpha=alpha,
                           family=bloch.name, details={'steps': config.steps}))
    return cases


@command('flatness')
def flatness_jobs(config):
    return _bind(_flatness_job, config, list(config.alphas))


def _convexity_job(config, spec, rng):
    alpha = spec
    generic = abs(alpha) != 1
    witness = bloch_family()
    quantum = convexity_failure_check(alpha, [(witness, [np.array(WITNESS_POINTS['qubit'])])],
                                      compute_bkm_defect=generic)
    diagonal = diagonal_family()
    grid = parameter_grid(diagonal.name, rng, config.trials or Config.GRID_POINTS)
    classical = convexity_failure_check(alpha, [(diagonal, grid)], compute_bkm_defect=False)

    threshold, comparison = (Config.CONVEXITY_GAP, '>=') if generic else (Config.CLASSICAL_TOL, '<=')
    cases = [
        _case('quantum-witness', quantum.max_difference, threshold, comparison, alpha=alpha,
              family=witness.name, details=quantum.serialize()),
        _case('classical', classical.max_difference, Config.CLASSICAL_TOL, '<=', alpha=alpha,
              family=diagonal.name, details=classical.serialize())
    ]
    if generic:
        cases.append(_case('bkm-duality', quantum.bkm_defect, config.gap, '>=', metric='bkm', alpha=alpha,
                           family=witness.name))
    return cases


@command('convexity-failure')
def convexity_jobs(config):
    return _bind(_convexity_job, config, list(config.alphas))


def _entropy_job(config, spec, rng):
    index = spec
    n = config.dim or 3
    gibbs = GibbsFamily(tuple(random_hermitian(n, rng) for _ in range(Config.ENTROPY_OBSERVABLES)))
    rho = random_state(n, rng)
    report = entropy_projection_demo(rho, gibbs)

    direction = random_tangent(n, rng)
    direction = direction / np.sqrt(bkm_direct(rho, direction, direction))
    taylor = relative_entropy_taylor_check(rho, direction)

    label = f'instance-{index}'
    fields = {'metric': 'bkm', 'alpha': 1.0, 'family': f'gibbs:{n}'}
    return [
        _case(f'{label}:mean-matching', report.mean_residual, Config.MEAN_MATCH_TOL, '<=',
              inconclusive=not report.converged, details=report.serialize(), **fields),
        _case(f'{label}:bkm-orthogonality', report.orthogonality_residual, Config.ORTHOGONALITY_TOL, '<=',
              inconclusive=not report.converged, **fields),
        _case(f'{label}:taylor', taylor['one_sided_residual'], Config.TAYLOR_TOL, '<=', details=taylor, **fields),
        _case(f'{label}:taylor-symmetric', taylor['symmetric_residual'], Config.TAYLOR_SYMMETRIC_TOL, '<=',
              **fields)
    ]


@command('entropy-projection')
def entropy_jobs(config):
    instances = config.trials or Config.ENTROPY_INSTANCES
    return _bind(_entropy_job, config, list(range(instances)))


def _relative_gap(a, b, scale):
    return abs(a - b) / max(abs(b), 1e-6 * scale)


def _metric_table_job(config, spec, rng):
    alpha, n = spec
    samples = config.trials or Config.METRIC_TABLE_SAMPLES
    dual = dual_function(alpha)
    functions = builtin_functions(((1 + alpha) / 2,) if abs(alpha) < 1 else ())
    bures, rld = bures_function(), rld_function()
    equivalence = ordering = fisher = 0.0

    for _ in range(samples):
        rho = random_state(n, rng)
        a, b = random_tangent(n, rng), random_tangent(n, rng)
        kernel = metric_eval(rho, dual, a, b)
        direct = wyd_direct(rho, alpha, a, b) if abs(alpha) < 1 else bkm_direct(rho, a, b)
        scale = np.sqrt(metric_eval(rho, dual, a, a) * metric_eval(rho, dual, b, b))
        equivalence = max(equivalence, _relative_gap(direct, kernel, scale))

        lower, upper = metric_eval(rho, bures, a, a), metric_eval(rho, rld, a, a)
        for f in functions:
            value = metric_eval(rho, f, a, a)
            ordering = max(ordering, (lower - value) / value, (value - upper) / value)

        floor = Config.SAMPLING_SPECTRAL_FLOOR
        p = floor + (1 - n * floor) * rng.dirichlet(np.ones(n))
        d = rng.normal(size=n)
        d = d - d.mean()
        classical = float(np.sum(d ** 2 / p))
        for f in functions:
            value = metric_eval(np.diag(p), f, np.diag(d), np.diag(d))
            fisher = max(fisher, abs(value - classical) / classical)

    fields = {'alpha': alpha, 'family': f'random:{n}'}
    details = {'samples': samples, 'dim': n, 'metrics': [f.name for f in functions]}
    return [
        _case('kernel-direct', equivalence, Config.EQUIVALENCE_TOL, '<=', metric=dual.name, details=details,
              **fields),
        _case('ordering', max(ordering, 0.0), Config.FISHER_TOL, '<=', metric='bures<=f<=rld', **fields),
        _case('classical-fisher', fisher, Config.FISHER_TOL, '<=', metric='builtin', **fields)
    ]


@command('metric-table')
def metric_table_jobs(config):
    dims = (config.dim,) if config.dim else Config.METRIC_TABLE_DIMS
    return _bind(_metric_table_job, config, [(alpha, n) for alpha in config.alphas for n in dims])


# Runner

def _evaluate(job):
    return job()


def run(config):
    config.validate()
    if config.command not in COMMANDS:
        raise ConfigError('command', f'no runner registered for {config.command!r}')

    started = time.perf_counter()
    jobs = COMMANDS[config.command](config)
    logger.info('%s: %d jobs on %d worker(s)', config.command, len(jobs), config.workers)
    if config.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            batches = list(pool.map(_evaluate, jobs))
    else:
        batches = [job() for job in jobs]

    cases = []
    for batch in batches:
        for case in batch:
            case['case'] = len(cases)
            case['command'] = config.command
            cases.append(case)
            logger.debug('case %d %s: %s %.6g', case['case'], case['label'], case['comparison'], case['value'])

    record = ExperimentRecord(
        command=config.command,
        config=config.to_dict(),
        version=__version__,
        cases=cases,
        wall_clock=time.perf_counter() - started
    )
    logger.info('%s finished: %d cases, passed=%s, inconclusive=%s',
                config.command, len(cases), record.passed, record.inconclusive)
    return record


def exit_status(record):
    """0 pass, 1 a definite failure, 3 inconclusive without failure."""
    failed = any(not case['passed'] and not case['inconclusive'] for case in record.cases)
    if failed:
        return Config.EXIT_CODES['FAIL']
    if record.inconclusive:
        return Config.EXIT_CODES['INCONCLUSIVE']
    return Config.EXIT_CODES['PASS']
