import pytest

from config.config import Config, ExperimentConfig
from qigeom.api.emit import to_json_lines
from qigeom.api.experiments import COMMANDS, exit_status, run
from qigeom.models.models import ExperimentRecord
from qigeom.utils.errors import ConfigError

EXIT = Config.EXIT_CODES


def _labels(record):
    return [case['label'] for case in record.cases]


def _without_clock(record):
    record.wall_clock = 0.0
    return to_json_lines(record)


def test_every_command_is_registered():
    assert set(COMMANDS) == set(Config.COMMANDS)


def test_duality_passes_for_wyd():
    record = run(ExperimentConfig('duality', alphas=(0.5,), metrics=('wyd',), trials=1))
    assert len(record.cases) == 1
    case = record.cases[0]
    assert case['case'] == 0 and case['command'] == 'duality'
    assert case['metric'] == 'wyd:0.75' and case['family'] == 'qubit'
    assert case['details']['expect_dual'] and case['details']['dual']
    assert exit_status(record) == EXIT['PASS']


def test_duality_falsifies_bures():
    record = run(ExperimentConfig('duality', alphas=(0.0,), metrics=('bures',), trials=1))
    case = record.cases[0]
    assert not case['details']['expect_dual'] and not case['details']['dual']
    assert case['comparison'] == '>=' and case['passed']


def test_duality_failure_and_inconclusive_exit_codes():
    failing = run(ExperimentConfig('duality', alphas=(0.5,), metrics=('wyd',), trials=1, tol=1e-20, gap=1e-19))
    assert exit_status(failing) == EXIT['FAIL']
    unsure = run(ExperimentConfig('duality', alphas=(0.5,), metrics=('wyd',), trials=1, tol=1e-20, gap=1.0))
    assert unsure.cases[0]['inconclusive'] and not unsure.cases[0]['passed']
    assert exit_status(unsure) == EXIT['INCONCLUSIVE']


def test_exit_status_prefers_failure():
    cases = [{'passed': False, 'inconclusive': True}, {'passed': False, 'inconclusive': False}]
    assert exit_status(ExperimentRecord('duality', {}, '0', cases)) == EXIT['FAIL']
    assert exit_status(ExperimentRecord('duality', {}, '0', cases[:1])) == EXIT['INCONCLUSIVE']
    assert exit_status(ExperimentRecord('duality', {}, '0', [])) == EXIT['PASS']


def test_duality_over_all_families():
    record = run(ExperimentConfig('duality', alphas=(-0.5,), metrics=('wyd',), family='all', trials=1))
    assert [case['family'] for case in record.cases] == ['qubit', 'qutrit']
    assert exit_status(record) == EXIT['PASS']


def test_runs_are_deterministic():
    config = ExperimentConfig('duality', alphas=(0.5, -0.5), metrics=('wyd', 'bkm'), trials=1)
    assert _without_clock(run(config)) == _without_clock(run(config))


def test_workers_do_not_change_results():
    serial = ExperimentConfig('duality', alphas=(0.5, -0.5), metrics=('wyd',), trials=1)
    threaded = ExperimentConfig('duality', alphas=(0.5, -0.5), metrics=('wyd',), trials=1, workers=2)
    assert [c['value'] for c in run(serial).cases] == [c['value'] for c in run(threaded).cases]


@pytest.mark.parametrize('config, field_name', [
    (ExperimentConfig('duality', metrics=('fidelity',)), 'metrics'),
    (ExperimentConfig('duality', dim=4), 'dim'),
    (ExperimentConfig('duality', family='qubit-hat'), 'family'),
    (ExperimentConfig('duality', family='torus'), 'family'),
    (ExperimentConfig('potential', alphas=(1.0,)), 'alphas'),
    (ExperimentConfig('flatness', alphas=(2.0,)), 'alphas')
])
def test_configuration_errors(config, field_name):
    with pytest.raises(ConfigError) as info:
        run(config)
    assert info.value.field_name == field_name


def test_cone_families_need_the_cone():
    record = run(ExperimentConfig('duality', alphas=(0.5,), metrics=('wyd',), family='qubit-hat',
                                  manifold='hat', trials=1))
    assert record.cases[0]['family'] == 'qubit-hat'
    assert exit_status(record) == EXIT['PASS']


def test_transport_duality():
    record = run(ExperimentConfig('transport-duality', alphas=(0.5,), metrics=('wyd', 'bures'), steps=16))
    assert _labels(record) == ['witness-curve', 'random-curve', 'witness-curve']
    assert [case['metric'] for case in record.cases] == ['wyd:0.75', 'wyd:0.75', 'bures']
    assert exit_status(record) == EXIT['PASS']


def test_potential():
    record = run(ExperimentConfig('potential', alphas=(0.5,)))
    assert _labels(record) == ['hessian', 'affine-relation', 'jacobian', 'closed-form-legendre',
                               'numeric-legendre', 'trace-identity']
    assert exit_status(record) == EXIT['PASS']


def test_monotonicity():
    record = run(ExperimentConfig('monotonicity', alphas=(0.4,), metrics=('wyd',), trials=6))
    assert _labels(record) == ['min-margin', 'depolarizing-strict-fraction']
    assert record.cases[0]['details']['trials'] == 6
    assert exit_status(record) == EXIT['PASS']


def test_flatness():
    record = run(ExperimentConfig('flatness', alphas=(0.5, 1.0), steps=32))
    assert _labels(record) == ['affine-flatness', 'path-dependence', 'affine-flatness']
    assert exit_status(record) == EXIT['PASS']


def test_convexity_failure():
    record = run(ExperimentConfig('convexity-failure', alphas=(0.0, -1.0), trials=1))
    assert _labels(record) == ['quantum-witness', 'classical', 'bkm-duality', 'quantum-witness', 'classical']
    assert exit_status(record) == EXIT['PASS']


def test_entropy_projection():
    record = run(ExperimentConfig('entropy-projection', dim=2, trials=2))
    assert len(record.cases) == 8
    assert record.cases[0]['label'] == 'instance-0:mean-matching'
    assert exit_status(record) == EXIT['PASS']


def test_metric_table():
    record = run(ExperimentConfig('metric-table', alphas=(0.5, 1.0), dim=2, trials=3))
    assert _labels(record) == ['kernel-direct', 'ordering', 'classical-fisher'] * 2
    assert record.cases[3]['metric'] == 'bkm'
    assert exit_status(record) == EXIT['PASS']


def test_uniqueness_scan_reports_every_candidate():
    record = run(ExperimentConfig('uniqueness-scan', alphas=(0.0,), trials=1))
    labels = _labels(record)
    assert labels[0] == 'wyd:wyd:0.5'
    assert labels[-1] == 'wyd-minimal'
    assert 'scaled:3*wyd:0.5' in labels
    assert record.cases[0]['passed']
    assert record.cases[-1]['passed']


def test_uniqueness_scan_falsifies_every_rival():
    record = run(ExperimentConfig('uniqueness-scan', alphas=(0.5,)))
    perturbed = [case for case in record.cases if case['label'].startswith('perturbed:')]
    assert len(perturbed) == 2
    assert all(case['passed'] and case['comparison'] == '>=' for case in perturbed)
    assert exit_status(record) == EXIT['PASS']


def test_uniqueness_scan_near_alpha_one_shows_the_limit_trend():
    record = run(ExperimentConfig('uniqueness-scan', alphas=(0.999,)))
    limit = next(case for case in record.cases if case['label'] == 'limit:bkm')
    assert limit['passed'] and not limit['inconclusive']
    assert limit['value'] <= Config.LIMIT_TREND_TOL
    assert exit_status(record) == EXIT['PASS']
