import json
import logging
import math
import os
import sys

import numpy as np
import pandas as pd

from config.config import Config
from qigeom.utils.errors import ConfigError

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    'case', 'command', 'label', 'metric', 'alpha', 'family', 'value', 'threshold', 'comparison',
    'passed', 'inconclusive'
]


def format_float(value):
    """17 significant digits; always carries a decimal point or exponent so it parses back as a float."""
    if math.isnan(value):
        return 'NaN'
    if math.isinf(value):
        return 'Infinity' if value > 0 else '-Infinity'
    text = '%.17g' % value
    if not any(mark in text for mark in '.e'):
        text += '.0'
    return text


class RecordEncoder(json.JSONEncoder):
    """JSON with floats at 17 significant digits and NumPy values unwrapped."""

    def default(self, o):
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super().default(o)

    def iterencode(self, o, _one_shot=False):
        # the C accelerator always writes repr(float)
        encoder = json.encoder.encode_basestring_ascii if self.ensure_ascii else json.encoder.encode_basestring
        markers = {} if self.check_circular else None
        iterencode = json.encoder._make_iterencode(
            markers, self.default, encoder, self.indent, format_float, self.key_separator, self.item_separator,
            self.sort_keys, self.skipkeys, _one_shot
        )
        return iterencode(o, 0)


def to_json_lines(record):
    lines = [json.dumps(record.serialize(), cls=RecordEncoder)]
    lines += [json.dumps(dict(case, kind='case'), cls=RecordEncoder) for case in record.cases]
    return '\n'.join(lines) + '\n'


def parse_json_lines(text):
    """Inverse of to_json_lines: (header, cases)."""
    rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    if not rows or rows[0].get('kind') != 'record':
        raise ValueError('first line is not a record header')
    return rows[0], rows[1:]


def to_frame(record):
    rows = [{column: case[column] for column in CSV_COLUMNS} for case in record.cases]
    frame = pd.DataFrame(rows, columns=CSV_COLUMNS)
    for column in ('alpha', 'value', 'threshold'):
        frame[column] = frame[column].astype(float)
    return frame


def _resolve(path):
    return path if os.path.isabs(path) else os.path.join(Config.OUTPUT_DIR, path)


def _open(path):
    directory = os.path.dirname(path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        return open(path, 'w', encoding='utf-8', newline='')
    except OSError as exc:
        raise ConfigError('output', f'cannot write {path}: {exc}')


def emit(record, format='jsonl', path=None):
    """Write the record to `path` (stdout when None) and return the resolved path."""
    if format not in ('jsonl', 'csv'):
        raise ConfigError('format', f'unknown format {format!r}')
    if path:
        path = _resolve(path)
    handle = _open(path) if path else sys.stdout
    try:
        if format == 'jsonl':
            handle.write(to_json_lines(record))
        else:
            to_frame(record).to_csv(handle, index=False, float_format='%.17g')
    except OSError as exc:
        raise ConfigError('output', f'cannot write {path or "stdout"}: {exc}')
    finally:
        if path:
            handle.close()
    if path:
        logger.info('wrote %d cases to %s', len(record.cases), path)
    return path
