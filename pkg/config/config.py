import os
from dataclasses import asdict, dataclass, field, fields, replace

from qigeom.utils.errors import ConfigError


class Config:
    # relative --output paths resolve against this directory
    OUTPUT_DIR = os.environ.get('QIGEOM_OUTPUT_DIR') or os.getcwd()
    DEFAULT_SEED = int(os.environ.get('QIGEOM_SEED') or 7)

    # Spectral calculus
    DEGENERACY_THRESHOLD = 1e-10
    CONFLUENT_THRESHOLD = 1e-4
    HERMITIAN_TOL = 1e-12
    TRACE_TOL = 1e-10

    # Charts and sampling
    CHART_EIGENVALUE_FLOOR = 1e-6
    SAMPLING_SPECTRAL_FLOOR = 0.05
    FIRST_DERIVATIVE_STEP = 1e-4
    SECOND_DERIVATIVE_STEP = 1e-3
    METRIC_DERIVATIVE_STEP = 1e-3
    STEP_SHRINK_ATTEMPTS = 3

    # Monotone functions
    FUNCTION_SYMMETRY_TOL = 1e-10
    FUNCTION_NORMALIZATION_TOL = 1e-12
    SYMMETRY_GRID = tuple(2.0 ** k for k in range(-6, 7))

    # Channels
    KRAUS_TOL = 1e-10
    CHANNEL_EIGENVALUE_FLOOR = 1e-12
    CHANNEL_MIXING = 1e-10

    # Transport
    TRANSPORT_STEPS = 256
    MAX_CURVE_JUMP = 0.5

    # Duality lab
    DUALITY_TOL = 5e-5
    FALSIFICATION_GAP = 1e-2
    # BKM is only approximately dual for 1 - |alpha| <= LIMIT_TREND_WINDOW
    LIMIT_TREND_WINDOW = 1e-2
    LIMIT_TREND_TOL = 1e-2
    KERNEL_SYMMETRY_TOL = 1e-8
    NEWTON_MAX_ITER = 200
    NEWTON_TOL = 1e-11
    GRID_POINTS = 3
    MONOTONICITY_TRIALS = 1000
    ENTROPY_INSTANCES = 20
    ENTROPY_OBSERVABLES = 2
    METRIC_TABLE_SAMPLES = 50
    METRIC_TABLE_DIMS = (2, 3, 4)

    # Pass thresholds of the experiment commands
    TRANSPORT_DUALITY_TOL = 1e-6
    TRANSPORT_FALSIFICATION_GAP = 1e-3
    HESSIAN_TOL = 1e-5
    AFFINE_TOL = 1e-6
    JACOBIAN_TOL = 1e-5
    LEGENDRE_TOL = 1e-8
    FLATNESS_TOL = 1e-6
    PATH_DEPENDENCE_GAP = 1e-3
    CONVEXITY_GAP = 1e-4
    CLASSICAL_TOL = 1e-8
    MONOTONICITY_SLACK = 1e-9
    STRICT_MARGIN = 1e-12
    STRICT_FRACTION = 0.99
    MEAN_MATCH_TOL = 1e-7
    ORTHOGONALITY_TOL = 1e-6
    TAYLOR_TOL = 1e-4
    TAYLOR_SYMMETRIC_TOL = 1e-3
    EQUIVALENCE_TOL = 1e-8
    FISHER_TOL = 1e-9

    # Case status labels
    CASE_STATUS = {
        'PASS': 'pass',
        'FAIL': 'fail',
        'INCONCLUSIVE': 'inconclusive'
    }

    # Exit codes
    EXIT_CODES = {
        'PASS': 0,
        'FAIL': 1,
        'USAGE': 2,
        'INCONCLUSIVE': 3
    }

    COMMANDS = (
        'duality',
        'transport-duality',
        'potential',
        'uniqueness-scan',
        'monotonicity',
        'flatness',
        'convexity-failure',
        'entropy-projection',
        'metric-table'
    )

    OUTPUT_FORMATS = ('jsonl', 'csv')


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    alphas: tuple = (0.5,)
    metrics: tuple = ('wyd',)
    dim: int = None
    family: str = 'auto'
    seed: int = Config.DEFAULT_SEED
    trials: int = None
    steps: int = Config.TRANSPORT_STEPS
    tol: float = Config.DUALITY_TOL
    gap: float = Config.FALSIFICATION_GAP
    manifold: str = 'M'
    output: str = None
    format: str = 'jsonl'
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in Config.COMMANDS:
            raise ConfigError('command', f'unknown command {self.command!r}')
        if not self.alphas:
            raise ConfigError('alphas', 'at least one alpha is required')
        for alpha in self.alphas:
            if not -1.0 <= alpha <= 1.0:
                raise ConfigError('alphas', f'alpha {alpha} outside [-1, 1]')
        if not self.metrics:
            raise ConfigError('metrics', 'at least one metric is required')
        for name in ('dim', 'trials', 'steps', 'workers'):
            if getattr(self, name) is not None and getattr(self, name) < 1:
                raise ConfigError(name, f'{name} must be a positive integer')
        for name in ('tol', 'gap'):
            if not getattr(self, name) > 0:
                raise ConfigError(name, f'{name} must be positive')
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError('seed', 'seed must fit in 64 bits')
        if self.manifold not in ('M', 'hat'):
            raise ConfigError('manifold', "manifold must be 'M' or 'hat'")
        if self.format not in Config.OUTPUT_FORMATS:
            raise ConfigError('format', f'format must be one of {Config.OUTPUT_FORMATS}')
        return self

    def to_dict(self):
        data = asdict(self)
        data['alphas'] = list(self.alphas)
        data['metrics'] = list(self.metrics)
        return data


_LIST_KEYS = {'alphas', 'metrics'}
_INT_KEYS = {'dim', 'seed', 'trials', 'steps', 'workers'}
_FLOAT_KEYS = {'tol', 'gap'}


def _coerce(key, raw):
    try:
        if key in _LIST_KEYS:
            items = [item.strip() for item in raw.split(',') if item.strip()]
            return tuple(float(item) for item in items) if key == 'alphas' else tuple(items)
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise ConfigError(key, f'cannot parse value {raw!r}')
    return raw


def load_config_file(path):
    """Read a flat key = value file into a dict of typed overrides."""
    known = {f.name for f in fields(ExperimentConfig)} - {'extra'}
    values = {}
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ConfigError('config', f'cannot read config file {path}: {exc}')

    for number, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError('config', f'line {number} is not key = value')
        key, raw = (part.strip() for part in line.split('=', 1))
        key = key.replace('-', '_')
        if key == 'alpha':
            key = 'alphas'
        if key == 'metric':
            key = 'metrics'
        if key not in known:
            raise ConfigError(key, f'unknown config key on line {number}')
        values[key] = _coerce(key, raw)
    return values


def merge_config(command, cli_values, file_values=None):
    """CLI flags > config file > defaults."""
    config = ExperimentConfig(command=command)
    if file_values:
        file_values = {k: v for k, v in file_values.items() if k != 'command'}
        config = replace(config, **file_values)
    overrides = {k: v for k, v in cli_values.items() if v is not None}
    if overrides:
        config = replace(config, **overrides)
    return config.validate()
