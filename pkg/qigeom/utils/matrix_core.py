"""Dense Hermitian spectral calculus.

Every matrix function here is evaluated in the eigenbasis of its argument.
Directional derivatives follow the Daleckii-Krein formulas: the first
Frechet derivative multiplies the direction entrywise by first divided
differences, the second one contracts two directions against the tensor of
second divided differences.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import exprel

from config.config import Config
from qigeom.models.models import CommutantSplit, Spectrum
from qigeom.utils.errors import DimensionError, DomainError, ParameterError, SymmetryError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralFunction:
    """A scalar function with its first two derivatives.

    `divided(x, y)` is an optional closed form for the first divided
    difference that stays accurate when x and y are close.
    """
    name: str
    value: Callable
    first: Callable
    second: Callable
    divided: Optional[Callable] = None
    positive_domain: bool = True

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))


def identity_function():
    return SpectralFunction(
        'identity',
        lambda x: np.asarray(x, dtype=float),
        lambda x: np.ones_like(x, dtype=float),
        lambda x: np.zeros_like(x, dtype=float),
        positive_domain=False
    )


def power_function(p, scale=1.0):
    """scale * x**p. Integer powers >= 0 are defined on the whole real line."""
    p = float(p)
    if p.is_integer() and p >= 0:
        return SpectralFunction(
            f'x^{p:g}',
            lambda x: scale * np.power(x, p),
            lambda x: scale * p * np.power(x, p - 1) if p >= 1 else np.zeros_like(x, dtype=float),
            lambda x: scale * p * (p - 1) * np.power(x, p - 2) if p >= 2 else np.zeros_like(x, dtype=float),
            positive_domain=False
        )

    def divided(x, y):
        u = np.log(x / y)
        return scale * p * np.power(y, p - 1) * exprel(p * u) / exprel(u)

    return SpectralFunction(
        f'x^{p:g}',
        lambda x: scale * np.power(x, p),
        lambda x: scale * p * np.power(x, p - 1),
        lambda x: scale * p * (p - 1) * np.power(x, p - 2),
        divided=divided
    )


def log_function(scale=1.0):
    def divided(x, y):
        return scale / (y * exprel(np.log(x / y)))

    return SpectralFunction(
        'log',
        lambda x: scale * np.log(x),
        lambda x: scale / x,
        lambda x: -scale / x ** 2,
        divided=divided
    )


def exp_function():
    return SpectralFunction(
        'exp',
        np.exp,
        np.exp,
        np.exp,
        divided=lambda x, y: np.exp(y) * exprel(x - y),
        positive_domain=False
    )


def hermiticity_violation(matrix):
    matrix = np.asarray(matrix)
    if not matrix.size:
        return 0.0
    return float(np.max(np.abs(matrix - matrix.conj().T)))


def symmetrize(matrix):
    return (matrix + matrix.conj().T) / 2


def commutator(a, b):
    return a @ b - b @ a


def _check_square(matrix):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise DimensionError(f'expected a non-empty square matrix, got shape {matrix.shape}')
    return matrix


def spectral_decompose(matrix):
    """Eigendecomposition of a self-adjoint matrix, eigenvalues ascending."""
    matrix = _check_square(np.asarray(matrix, dtype=complex))
    if not np.all(np.isfinite(matrix)):
        raise DomainError('spectral_decompose', float('nan'))
    tol = Config.HERMITIAN_TOL * max(1.0, float(np.max(np.abs(matrix))))
    violation = hermiticity_violation(matrix)
    if violation > tol:
        raise SymmetryError(violation, tol)
    eigenvalues, unitary = np.linalg.eigh(symmetrize(matrix))
    return Spectrum(eigenvalues, unitary)


def as_spectrum(base):
    """Accept a Spectrum, anything carrying one, or a raw Hermitian matrix."""
    if isinstance(base, Spectrum):
        return base
    spectrum = getattr(base, 'spectrum', None)
    if isinstance(spectrum, Spectrum):
        return spectrum
    return spectral_decompose(base)


def _as_spectral_function(f):
    if isinstance(f, SpectralFunction):
        return f
    name = getattr(f, '__name__', repr(f))
    return SpectralFunction(name, f, None, None, positive_domain=False)


def _evaluate(f, eigenvalues):
    if f.positive_domain and eigenvalues[0] <= 0:
        raise DomainError(f.name, float(eigenvalues[0]))
    with np.errstate(all='ignore'):
        values = np.asarray(f.value(eigenvalues))
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise DomainError(f.name, float(eigenvalues[np.argmax(bad)]))
    return values


def apply_scalar_function(f, base):
    """U diag(f(lambda)) U^H."""
    f = _as_spectral_function(f)
    spectrum = as_spectrum(base)
    values = _evaluate(f, spectrum.eigenvalues)
    result = spectrum.from_eigenbasis(np.diag(values).astype(complex))
    if np.isrealobj(values):
        result = symmetrize(result)
    return result


def first_divided_differences(f, eigenvalues):
    """Matrix of f[l_i, l_j], with f'(midpoint) on (near-)coincident pairs."""
    f = _as_spectral_function(f)
    if f.first is None:
        raise ParameterError(f'{f.name} has no derivative; build it as a SpectralFunction')
    lam = np.asarray(eigenvalues, dtype=float)
    _evaluate(f, lam)
    x, y = lam[:, None], lam[None, :]
    scale = np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
    degenerate = np.abs(x - y) <= Config.DEGENERACY_THRESHOLD * scale
    midpoint = f.first((x + y) / 2)
    with np.errstate(divide='ignore', invalid='ignore'):
        if f.divided is not None:
            quotient = f.divided(x, y)
        else:
            values = f.value(lam)
            quotient = (values[:, None] - values[None, :]) / (x - y)
    return np.where(degenerate, midpoint, quotient)


def second_divided_differences(f, eigenvalues):
    """Tensor T[k, m, l] = f[l_k, l_m, l_l].

    Clustered triples fall back to f''(mean)/2, whose first-order error
    vanishes at the mean.
    """
    f = _as_spectral_function(f)
    if f.second is None:
        raise ParameterError(f'{f.name} has no second derivative; build it as a SpectralFunction')
    lam = np.asarray(eigenvalues, dtype=float)
    first = first_divided_differences(f, lam)
    n = len(lam)
    tensor = np.empty((n, n, n))
    for k, m, l in itertools.product(range(n), repeat=3):
        a, b, c = sorted((k, m, l), key=lambda index: lam[index])
        spread = lam[c] - lam[a]
        scale = max(abs(lam[a]), abs(lam[c]))
        if not f.positive_domain:
            scale = max(1.0, scale)
        if spread <= Config.CONFLUENT_THRESHOLD * scale:
            tensor[k, m, l] = float(f.second(np.array((lam[a] + lam[b] + lam[c]) / 3))) / 2
        else:
            tensor[k, m, l] = (first[a, b] - first[b, c]) / (lam[a] - lam[c])
    return tensor


def frechet_derivative(f, base, direction):
    spectrum = as_spectrum(base)
    direction = np.asarray(direction, dtype=complex)
    if direction.shape != (spectrum.dim, spectrum.dim):
        raise DimensionError(f'direction of shape {direction.shape} for a base of dimension {spectrum.dim}')
    kernel = first_divided_differences(f, spectrum.eigenvalues)
    return symmetrize(spectrum.from_eigenbasis(kernel * spectrum.to_eigenbasis(direction)))


def second_frechet_derivative(f, base, first_direction, second_direction):
    """D^2 f(A)[E, F], symmetric in E and F."""
    spectrum = as_spectrum(base)
    e = spectrum.to_eigenbasis(np.asarray(first_direction, dtype=complex))
    g = spectrum.to_eigenbasis(np.asarray(second_direction, dtype=complex))
    if e.shape != g.shape or e.shape != (spectrum.dim, spectrum.dim):
        raise DimensionError(f'directions of shapes {e.shape} and {g.shape} for dimension {spectrum.dim}')
    tensor = second_divided_differences(f, spectrum.eigenvalues)
    result = np.einsum('kml,km,ml->kl', tensor, e, g) + np.einsum('kml,km,ml->kl', tensor, g, e)
    return symmetrize(spectrum.from_eigenbasis(result))


def hs_inner(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f'Hilbert-Schmidt product of shapes {a.shape} and {b.shape}')
    value = complex(np.vdot(a, b))
    tol = Config.HERMITIAN_TOL * max(1.0, float(np.max(np.abs(a), initial=0)), float(np.max(np.abs(b), initial=0)))
    if hermiticity_violation(a) <= tol and hermiticity_violation(b) <= tol:
        return value.real
    return value


def commutant_split(base, direction):
    """Split D into a part commuting with the base and a commutator [base, delta]."""
    spectrum = as_spectrum(base)
    lam = spectrum.eigenvalues
    d = spectrum.to_eigenbasis(np.asarray(direction, dtype=complex))
    x, y = lam[:, None], lam[None, :]
    scale = np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
    degenerate = np.abs(x - y) <= Config.DEGENERACY_THRESHOLD * scale
    with np.errstate(divide='ignore', invalid='ignore'):
        delta = np.where(degenerate, 0.0, d / (x - y))
    commutant = np.where(degenerate, d, 0.0)
    return CommutantSplit(
        symmetrize(spectrum.from_eigenbasis(commutant)),
        spectrum.from_eigenbasis(delta)
    )
