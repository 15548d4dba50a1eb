import io
import json
import math

import numpy as np
import pandas as pd
import pytest

from config.config import Config, ExperimentConfig
from qigeom.api.emit import (
    CSV_COLUMNS, RecordEncoder, emit, format_float, parse_json_lines, to_frame, to_json_lines
)
from qigeom.api.experiments import run
from qigeom.models.models import ExperimentRecord
from qigeom.utils.errors import ConfigError


def _case(index, value, passed=True, inconclusive=False, alpha=0.5):
    return {
        'case': index,
        'command': 'duality',
        'label': 'duality-defect',
        'metric': 'wyd:0.75',
        'alpha': alpha,
        'family': 'qubit',
        'value': value,
        'threshold': 5e-05,
        'comparison': '<=',
        'passed': passed,
        'inconclusive': inconclusive,
        'details': {'grid': [[0.1, 0.2]], 'note': 'x'}
    }


@pytest.fixture
def record():
    cases = [_case(0, 1 / 3), _case(1, 2.5e-3, passed=False, inconclusive=True), _case(2, 0.1, alpha=math.nan)]
    return ExperimentRecord('duality', {'command': 'duality', 'alphas': [0.5]}, '0.1.0', cases, 1.25)


def test_format_float():
    assert format_float(1.0) == '1.0'
    assert format_float(0.1) == '0.10000000000000001'
    assert format_float(1e300) == '1.0000000000000001e+300'
    assert format_float(math.nan) == 'NaN'
    assert format_float(-math.inf) == '-Infinity'


def test_json_lines_header_then_cases(record):
    header, cases = parse_json_lines(to_json_lines(record))
    assert header['kind'] == 'record'
    assert header['case_count'] == 3
    assert header['passed'] is False and header['inconclusive'] is True
    assert [case['kind'] for case in cases] == ['case'] * 3


def test_json_lines_round_trip_is_exact(record):
    _, cases = parse_json_lines(to_json_lines(record))
    for original, parsed in zip(record.cases, cases):
        assert parsed['value'] == original['value']
        assert parsed['threshold'] == original['threshold']
        assert parsed['details'] == original['details']
    assert math.isnan(cases[2]['alpha'])


def test_parse_needs_a_header():
    with pytest.raises(ValueError):
        parse_json_lines('{"kind": "case"}\n')


def test_frame_has_the_documented_columns(record):
    frame = to_frame(record)
    assert list(frame.columns) == CSV_COLUMNS
    assert frame['inconclusive'].tolist() == [False, True, False]


def test_csv_round_trip(record, tmp_path):
    path = tmp_path / 'out' / 'cases.csv'
    assert emit(record, 'csv', str(path)) == str(path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == CSV_COLUMNS
    assert frame['value'].tolist() == [case['value'] for case in record.cases]
    assert frame['inconclusive'].tolist() == [False, True, False]


def test_empty_csv_is_header_only(tmp_path):
    path = tmp_path / 'empty.csv'
    emit(ExperimentRecord('duality', {}, '0.1.0'), 'csv', str(path))
    assert path.read_text().splitlines() == [','.join(CSV_COLUMNS)]


def test_emit_to_stdout(record, capsys):
    assert emit(record) is None
    header, _ = parse_json_lines(capsys.readouterr().out)
    assert header['command'] == 'duality'


def test_unwritable_output(record, tmp_path):
    blocker = tmp_path / 'file'
    blocker.write_text('')
    with pytest.raises(ConfigError) as info:
        emit(record, 'jsonl', str(blocker / 'cases.jsonl'))
    assert info.value.field_name == 'output'


def test_unknown_format(record):
    with pytest.raises(ConfigError):
        emit(record, 'xml', None)


def test_real_record_round_trip():
    record = run(ExperimentConfig('duality', alphas=(0.5,), metrics=('wyd',), trials=1))
    header, cases = parse_json_lines(to_json_lines(record))
    assert header['config']['alphas'] == [0.5]
    assert cases[0]['value'] == record.cases[0]['value']
    assert cases[0]['details']['grid_points'] == 2


def test_json_lines_is_one_object_per_line(record):
    text = to_json_lines(record)
    assert text.endswith('\n')
    assert len(io.StringIO(text).readlines()) == 4


def test_relative_output_goes_to_the_output_directory(record, tmp_path, monkeypatch):
    monkeypatch.setattr(Config, 'OUTPUT_DIR', str(tmp_path))
    path = emit(record, 'jsonl', 'runs/duality.jsonl')
    assert path == str(tmp_path / 'runs' / 'duality.jsonl')
    assert (tmp_path / 'runs' / 'duality.jsonl').exists()


def test_encoder_writes_seventeen_digits_and_unwraps_numpy():
    payload = {'value': 0.1, 'grid': np.array([[0.5, 1e300]]), 'count': np.int64(3), 'dual': np.bool_(True),
               'alpha': math.nan}
    text = json.dumps(payload, cls=RecordEncoder)
    assert text == ('{"value": 0.10000000000000001, "grid": [[0.5, 1.0000000000000001e+300]], "count": 3, '
                    '"dual": true, "alpha": NaN}')
    assert json.loads(text)['grid'] == [[0.5, 1e300]]
