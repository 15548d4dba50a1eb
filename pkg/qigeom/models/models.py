from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from config.config import Config
from qigeom.utils.errors import (
    BasisError, ChannelError, ChartError, DimensionError, PositivityError, SymmetryError, TraceError
)


def _max_asymmetry(matrix):
    return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0


def _real_list(matrix):
    return np.real(np.asarray(matrix)).tolist()


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    unitary: np.ndarray

    @property
    def dim(self):
        return len(self.eigenvalues)

    def to_eigenbasis(self, matrix):
        return self.unitary.conj().T @ matrix @ self.unitary

    def from_eigenbasis(self, matrix):
        return self.unitary @ matrix @ self.unitary.conj().T

    def reconstruct(self):
        return self.from_eigenbasis(np.diag(self.eigenvalues).astype(complex))

    def serialize(self):
        return {
            'dim': self.dim,
            'eigenvalues': self.eigenvalues.tolist()
        }


@dataclass(frozen=True, eq=False)
class CommutantSplit:
    commutant_part: np.ndarray
    delta: np.ndarray


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """A positive definite matrix, i.e. a point of the extended manifold."""
    matrix: np.ndarray
    spectrum: Spectrum

    def __post_init__(self):
        if self.min_eigenvalue <= 0:
            raise PositivityError(self.min_eigenvalue)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def min_eigenvalue(self):
        return float(self.spectrum.eigenvalues[0])

    @property
    def trace(self):
        return float(np.sum(self.spectrum.eigenvalues))

    def as_weight(self):
        return WeightMatrix(self.matrix, self.spectrum)

    def serialize(self):
        return {
            'kind': type(self).__name__,
            'dim': self.dim,
            'eigenvalues': self.spectrum.eigenvalues.tolist(),
            'min_eigenvalue': self.min_eigenvalue
        }


@dataclass(frozen=True, eq=False)
class StateMatrix(WeightMatrix):
    """A unit-trace weight: an invertible density matrix."""

    def __post_init__(self):
        super().__post_init__()
        if abs(self.trace - 1.0) > Config.TRACE_TOL:
            raise TraceError(self.trace)


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: WeightMatrix
    mixture_rep: np.ndarray

    def __post_init__(self):
        if self.mixture_rep.shape != self.base.matrix.shape:
            raise DimensionError(
                f'tangent of shape {self.mixture_rep.shape} at base of shape {self.base.matrix.shape}')
        scale = max(1.0, float(np.max(np.abs(self.mixture_rep))) if self.mixture_rep.size else 1.0)
        violation = _max_asymmetry(self.mixture_rep)
        if violation > Config.HERMITIAN_TOL * scale:
            raise SymmetryError(violation, Config.HERMITIAN_TOL * scale)
        if isinstance(self.base, StateMatrix):
            trace = abs(np.trace(self.mixture_rep))
            if trace > Config.TRACE_TOL * scale:
                raise DimensionError(f'tangent to the state manifold must be traceless, got trace {trace:.3e}')

    def serialize(self):
        return {
            'base': self.base.serialize(),
            'mixture_rep_norm': float(np.linalg.norm(self.mixture_rep))
        }


@dataclass(frozen=True, eq=False)
class ParametrizedFamily:
    """A chart theta -> positive matrix, with optional analytic derivatives.

    `derivative(theta, i)` and `second_derivative(theta, i, j)` return the
    partial derivatives of the chart matrix; when absent, central differences
    are used. Charts must be side-effect free.
    """
    name: str
    param_dim: int
    chart: Callable
    derivative: Optional[Callable] = None
    second_derivative: Optional[Callable] = None
    on_states: bool = False
    step: Optional[float] = None

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.param_dim,):
            raise DimensionError(f'{self.name} expects {self.param_dim} parameters, got shape {theta.shape}')
        try:
            matrix = np.asarray(self.chart(theta), dtype=complex)
        except Exception as exc:
            raise ChartError(theta, str(exc)) from exc
        if not np.all(np.isfinite(matrix)):
            raise ChartError(theta, 'non-finite chart output')
        return matrix

    def serialize(self):
        return {
            'name': self.name,
            'param_dim': self.param_dim,
            'on_states': self.on_states,
            'analytic': self.derivative is not None
        }


@dataclass(frozen=True, eq=False)
class MonotoneFunctionSpec:
    name: str
    eval: Callable
    claimed_monotone: bool = True
    parameter: Optional[float] = None

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def serialize(self):
        return {
            'name': self.name,
            'claimed_monotone': self.claimed_monotone,
            'parameter': self.parameter
        }


@dataclass(frozen=True, eq=False)
class MetricKernel:
    base_spectrum: Spectrum
    coefficients: np.ndarray

    def apply(self, matrix):
        spectrum = self.base_spectrum
        return spectrum.from_eigenbasis(self.coefficients * spectrum.to_eigenbasis(matrix))


@dataclass(frozen=True, eq=False)
class KrausChannel:
    kraus_ops: tuple
    name: str = 'channel'

    def __post_init__(self):
        if not self.kraus_ops:
            raise ChannelError('a channel needs at least one Kraus operator')
        shapes = {np.shape(op) for op in self.kraus_ops}
        if len(shapes) != 1:
            raise ChannelError(f'Kraus operators have mixed shapes {sorted(shapes)}')
        total = sum(op.conj().T @ op for op in self.kraus_ops)
        defect = float(np.max(np.abs(total - np.eye(self.dim_in))))
        if defect > Config.KRAUS_TOL:
            raise ChannelError(f'{self.name} is not trace preserving: max |sum K^H K - I| = {defect:.3e}')

    @property
    def dim_in(self):
        return self.kraus_ops[0].shape[1]

    @property
    def dim_out(self):
        return self.kraus_ops[0].shape[0]

    def serialize(self):
        return {
            'name': self.name,
            'dim_in': self.dim_in,
            'dim_out': self.dim_out,
            'kraus_count': len(self.kraus_ops)
        }


@dataclass(frozen=True, eq=False)
class CurveSpec:
    family: ParametrizedFamily
    path: Callable
    step_count: int = Config.TRANSPORT_STEPS
    name: str = 'curve'

    def theta(self, t):
        return np.asarray(self.path(float(t)), dtype=float)

    def times(self, step_count=None):
        return np.linspace(0.0, 1.0, (step_count or self.step_count) + 1)


@dataclass(frozen=True, eq=False)
class CovariantDerivativeResult:
    base: WeightMatrix
    vector: TangentVector
    alpha_rep: np.ndarray
    alpha: float
    projected: bool

    def serialize(self):
        return {
            'alpha': self.alpha,
            'projected': self.projected,
            'mixture_norm': float(np.linalg.norm(self.vector.mixture_rep)),
            'alpha_rep_norm': float(np.linalg.norm(self.alpha_rep))
        }


@dataclass(frozen=True, eq=False)
class MonotonicityReport:
    metric_name: str
    channel_name: str
    lhs: float
    rhs: float
    regularized: bool = False
    inconclusive: bool = False

    @property
    def margin(self):
        return self.rhs - self.lhs

    def serialize(self):
        return {
            'metric': self.metric_name,
            'channel': self.channel_name,
            'lhs': self.lhs,
            'rhs': self.rhs,
            'margin': self.margin,
            'regularized': self.regularized,
            'inconclusive': self.inconclusive
        }


@dataclass(frozen=True, eq=False)
class DualityReport:
    metric_name: str
    alpha: float
    per_triple_defects: np.ndarray
    grid: np.ndarray
    manifold: str = 'M'
    family: str = ''
    scale: float = 1.0
    seed: Optional[int] = None

    @property
    def defect(self):
        if not self.per_triple_defects.size:
            return 0.0
        return float(np.max(np.abs(self.per_triple_defects)))

    def serialize(self):
        return {
            'metric': self.metric_name,
            'alpha': self.alpha,
            'manifold': self.manifold,
            'family': self.family,
            'scale': self.scale,
            'seed': self.seed,
            'defect': self.defect,
            'grid': np.asarray(self.grid).tolist()
        }


@dataclass(frozen=True, eq=False)
class TransportDualityReport:
    metric_name: str
    alpha: float
    initial_value: float
    values: np.ndarray
    times: np.ndarray
    manifold: str = 'hat'

    @property
    def deviation(self):
        if not self.values.size:
            return 0.0
        return float(np.max(np.abs(self.values - self.initial_value)))

    def serialize(self):
        return {
            'metric': self.metric_name,
            'alpha': self.alpha,
            'manifold': self.manifold,
            'initial_value': self.initial_value,
            'deviation': self.deviation
        }


@dataclass(frozen=True, eq=False)
class PotentialReport:
    alpha: float
    hessian: np.ndarray
    metric_matrix: np.ndarray
    affine_residual: float

    def __post_init__(self):
        for name in ('hessian', 'metric_matrix'):
            matrix = getattr(self, name)
            if np.max(np.abs(matrix - matrix.T)) > 1e-8 * max(1.0, np.max(np.abs(matrix))):
                raise SymmetryError(float(np.max(np.abs(matrix - matrix.T))), 1e-8)

    @property
    def residual(self):
        return float(np.max(np.abs(self.hessian - self.metric_matrix)))

    def serialize(self):
        return {
            'alpha': self.alpha,
            'residual': self.residual,
            'affine_residual': self.affine_residual,
            'hessian': _real_list(self.hessian),
            'metric_matrix': _real_list(self.metric_matrix)
        }


@dataclass(frozen=True, eq=False)
class DualCoordinateReport:
    alpha: float
    jacobian_residual: float
    legendre_residual: float
    closed_form_residual: float

    def serialize(self):
        return {
            'alpha': self.alpha,
            'jacobian_residual': self.jacobian_residual,
            'legendre_residual': self.legendre_residual,
            'closed_form_residual': self.closed_form_residual
        }


@dataclass(frozen=True, eq=False)
class UniquenessScanResult:
    alpha: float
    entries: list
    tol: float
    gap: float

    @property
    def wyd_entry(self):
        return next(entry for entry in self.entries if entry['role'] == 'wyd')

    @property
    def wyd_minimal(self):
        return all(self.wyd_entry['defect'] <= entry['defect'] for entry in self.entries
                   if entry['role'] in ('builtin', 'perturbed'))

    @property
    def inconclusive(self):
        return [entry['name'] for entry in self.entries if entry['status'] == Config.CASE_STATUS['INCONCLUSIVE']]

    @property
    def passed(self):
        return all(entry['status'] == Config.CASE_STATUS['PASS'] for entry in self.entries)

    def serialize(self):
        return {
            'alpha': self.alpha,
            'tol': self.tol,
            'gap': self.gap,
            'wyd_minimal': self.wyd_minimal,
            'passed': self.passed,
            'inconclusive': self.inconclusive,
            'entries': list(self.entries)
        }


@dataclass(frozen=True, eq=False)
class ConvexityReport:
    alpha: float
    max_difference: float
    bkm_defect: float
    family: str = ''

    def serialize(self):
        return {
            'alpha': self.alpha,
            'family': self.family,
            'max_difference': self.max_difference,
            'bkm_defect': self.bkm_defect
        }


@dataclass(frozen=True, eq=False)
class GibbsFamily:
    """exp(H0 + sum theta^i Y_i - Psi I) with Psi fixed by unit trace."""
    observables: tuple
    base_hamiltonian: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.observables:
            raise BasisError('a Gibbs family needs at least one observable')
        dim = self.dim
        vectors = [np.eye(dim).ravel()] + [np.asarray(y).ravel() for y in self.observables]
        stacked = np.concatenate([np.real(vectors), np.imag(vectors)], axis=1)
        if np.linalg.matrix_rank(stacked) < len(vectors):
            raise BasisError('identity and observables must be linearly independent')

    @property
    def dim(self):
        return np.shape(self.observables[0])[0]

    @property
    def param_dim(self):
        return len(self.observables)


@dataclass(frozen=True, eq=False)
class EntropyProjectionReport:
    theta: np.ndarray
    relative_entropy: float
    mean_residual: float
    orthogonality_residual: float
    iterations: int
    converged: bool
    gradient_norm: float

    def serialize(self):
        return {
            'theta': np.asarray(self.theta).tolist(),
            'relative_entropy': self.relative_entropy,
            'mean_residual': self.mean_residual,
            'orthogonality_residual': self.orthogonality_residual,
            'iterations': self.iterations,
            'converged': self.converged,
            'gradient_norm': self.gradient_norm
        }


@dataclass
class ExperimentRecord:
    command: str
    config: dict
    version: str
    cases: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self):
        return all(case['passed'] for case in self.cases)

    @property
    def inconclusive(self):
        return any(case['inconclusive'] for case in self.cases)

    def serialize(self):
        return {
            'kind': 'record',
            'command': self.command,
            'version': self.version,
            'config': self.config,
            'case_count': len(self.cases),
            'passed': self.passed,
            'inconclusive': self.inconclusive,
            'wall_clock': self.wall_clock
        }
