"""The state manifold M, the positive cone M-hat, and the alpha-embeddings.

For alpha in (-1, 1) the embedding is l_alpha(s) = (2/(1-alpha)) s^((1-alpha)/2);
alpha = 1 is the logarithm and alpha = -1 the identity. Tangent vectors are
stored in the mixture representation (the derivative of the matrix itself)
and converted on demand: the alpha-representation is the Frechet derivative
of l_alpha in the mixture direction, i.e. an entrywise product with the
divided differences of l_alpha in the base's eigenbasis.
"""
import logging

import numpy as np

from config.config import Config
from qigeom.models.models import ParametrizedFamily, StateMatrix, TangentVector, WeightMatrix
from qigeom.utils.errors import (
    BasisError, ChartError, DimensionError, ParameterError, PositivityError, TraceError
)
from qigeom.utils.matrix_core import (
    apply_scalar_function, as_spectrum, exp_function, first_divided_differences, frechet_derivative,
    hs_inner, identity_function, log_function, power_function, second_frechet_derivative,
    spectral_decompose, symmetrize
)

logger = logging.getLogger(__name__)


def weight_matrix(matrix):
    if isinstance(matrix, WeightMatrix):
        return matrix
    matrix = np.asarray(matrix, dtype=complex)
    return WeightMatrix(matrix, spectral_decompose(matrix))


def state_matrix(matrix):
    if isinstance(matrix, StateMatrix):
        return matrix
    if isinstance(matrix, WeightMatrix):
        return StateMatrix(matrix.matrix, matrix.spectrum)
    matrix = np.asarray(matrix, dtype=complex)
    return StateMatrix(matrix, spectral_decompose(matrix))


def _check_alpha(alpha, closed=True):
    if closed and not -1.0 <= alpha <= 1.0:
        raise ParameterError(f'alpha {alpha} outside [-1, 1]')
    if not closed and not -1.0 < alpha < 1.0:
        raise ParameterError(f'alpha {alpha} outside (-1, 1); use the log/identity limits')


def embedding_function(alpha):
    _check_alpha(alpha)
    if alpha == 1:
        return log_function()
    if alpha == -1:
        return identity_function()
    return power_function((1 - alpha) / 2, scale=2 / (1 - alpha))


def inverse_embedding_function(alpha):
    _check_alpha(alpha)
    if alpha == 1:
        return exp_function()
    if alpha == -1:
        return identity_function()
    q = (1 - alpha) / 2
    return power_function(1 / q, scale=q ** (1 / q))


def alpha_embed(sigma, alpha):
    _check_alpha(alpha, closed=False)
    return embed(sigma, alpha)


def embed(sigma, alpha):
    """l_alpha on the closed range [-1, 1]."""
    sigma = weight_matrix(sigma)
    return apply_scalar_function(embedding_function(alpha), sigma)


def representation_kernel(base, alpha):
    """Divided differences of l_alpha over the base spectrum."""
    base = weight_matrix(base)
    return first_divided_differences(embedding_function(alpha), base.spectrum.eigenvalues)


def alpha_representation(v, alpha):
    if alpha == -1:
        return v.mixture_rep
    return frechet_derivative(embedding_function(alpha), v.base, v.mixture_rep)


def tangency_residual(rho, alpha, matrix):
    """|Tr(rho^((1+alpha)/2) A)|, zero exactly on the alpha tangent space of M."""
    weight = apply_scalar_function(power_function((1 + alpha) / 2), weight_matrix(rho))
    return abs(hs_inner(weight, matrix))


def representation_convert(base, w, from_alpha, to_alpha):
    base = weight_matrix(base)
    w = np.asarray(w, dtype=complex)
    if w.shape != base.matrix.shape:
        raise DimensionError(f'representation of shape {w.shape} at base of shape {base.matrix.shape}')
    if from_alpha == to_alpha:
        return w
    if isinstance(base, StateMatrix):
        residual = tangency_residual(base, from_alpha, w)
        if residual > 1e-8 * max(1.0, float(np.max(np.abs(w)))):
            raise DimensionError(f'matrix is not an alpha={from_alpha} tangent of M (trace residual {residual:.3e})')
    spectrum = base.spectrum
    ratio = representation_kernel(base, to_alpha) / representation_kernel(base, from_alpha)
    return symmetrize(spectrum.from_eigenbasis(ratio * spectrum.to_eigenbasis(w)))


def tangent_from_representation(base, w, alpha):
    base = weight_matrix(base)
    return TangentVector(base, representation_convert(base.as_weight(), w, alpha, -1))


def sphere_project(rho, alpha, matrix):
    """Pi(A) = A - Tr(rho^((1+alpha)/2) A) rho^((1-alpha)/2)."""
    _check_alpha(alpha)
    rho = state_matrix(rho)
    weight = apply_scalar_function(power_function((1 + alpha) / 2), rho)
    radial = apply_scalar_function(power_function((1 - alpha) / 2), rho)
    return symmetrize(matrix - hs_inner(weight, matrix) * radial)


# Families

def family_point(family, theta):
    matrix = family.evaluate(theta)
    try:
        point = state_matrix(matrix) if family.on_states else weight_matrix(matrix)
    except (PositivityError, TraceError) as exc:
        raise ChartError(theta, str(exc)) from exc
    if point.min_eigenvalue < Config.CHART_EIGENVALUE_FLOOR:
        raise ChartError(theta, f'minimum eigenvalue {point.min_eigenvalue:.3e} below the chart floor')
    return point


def _step(family, theta, i, default):
    if family.step is not None:
        return family.step
    return default * max(1.0, abs(float(theta[i])))


def _unit(dim, i):
    e = np.zeros(dim)
    e[i] = 1.0
    return e


def _shrinking(stencil, h, theta):
    """Evaluate stencil(h), halving h while the chart leaves its domain."""
    for attempt in range(Config.STEP_SHRINK_ATTEMPTS + 1):
        try:
            return stencil(h)
        except (ChartError, PositivityError):
            if attempt == Config.STEP_SHRINK_ATTEMPTS:
                raise
            logger.warning('chart left its domain near theta=%s, shrinking step to %.3g', list(theta), h / 2)
            h /= 2


def chart_derivative(family, theta, i):
    theta = np.asarray(theta, dtype=float)
    if not 0 <= i < family.param_dim:
        raise DimensionError(f'index {i} out of range for {family.param_dim} parameters')
    if family.derivative is not None:
        return np.asarray(family.derivative(theta, i), dtype=complex)
    e = _unit(family.param_dim, i)

    def central(h):
        plus = family_point(family, theta + h * e).matrix
        minus = family_point(family, theta - h * e).matrix
        return (plus - minus) / (2 * h)

    return _shrinking(central, _step(family, theta, i, Config.FIRST_DERIVATIVE_STEP), theta)


def chart_second_derivative(family, theta, i, j):
    """Analytic when supplied, otherwise the 3x3 central stencil on (theta_i, theta_j)."""
    theta = np.asarray(theta, dtype=float)
    if family.second_derivative is not None:
        return np.asarray(family.second_derivative(theta, i, j), dtype=complex)
    if family.derivative is not None:
        e = _unit(family.param_dim, j)

        def differenced(h):
            plus = np.asarray(family.derivative(theta + h * e, i), dtype=complex)
            minus = np.asarray(family.derivative(theta - h * e, i), dtype=complex)
            return (plus - minus) / (2 * h)

        return _shrinking(differenced, _step(family, theta, j, Config.FIRST_DERIVATIVE_STEP), theta)

    ei, ej = _unit(family.param_dim, i), _unit(family.param_dim, j)

    def point(shift):
        return family_point(family, theta + shift).matrix

    def stencil(h):
        if i == j:
            return (point(h * ei) - 2 * point(0 * ei) + point(-h * ei)) / h ** 2
        return (point(h * ei + h * ej) - point(h * ei - h * ej)
                - point(-h * ei + h * ej) + point(-h * ei - h * ej)) / (4 * h ** 2)

    h = Config.SECOND_DERIVATIVE_STEP * max(1.0, abs(float(theta[i])), abs(float(theta[j])))
    return _shrinking(stencil, family.step or h, theta)


def family_tangent(family, theta, i):
    base = family_point(family, theta)
    return TangentVector(base, symmetrize(chart_derivative(family, theta, i)))


# Affine coordinates

def _gram(basis, dim):
    basis = [np.asarray(x, dtype=complex) for x in basis]
    if len(basis) != dim * dim:
        raise BasisError(f'a basis of the {dim}x{dim} Hermitian matrices needs {dim * dim} elements, got {len(basis)}')
    gram = np.array([[hs_inner(x, y) for y in basis] for x in basis], dtype=float)
    if np.linalg.cond(gram) > 1e12:
        raise BasisError('basis Gram matrix is singular')
    return basis, gram


def affine_coordinates(sigma, alpha, basis):
    """xi with sum xi_i X_i = l_alpha(sigma)."""
    sigma = weight_matrix(sigma)
    basis, gram = _gram(basis, sigma.dim)
    target = embed(sigma, alpha)
    rhs = np.array([hs_inner(x, target) for x in basis], dtype=float)
    return np.linalg.solve(gram, rhs)


def _embedded(xi, basis):
    return symmetrize(sum(float(c) * x for c, x in zip(xi, basis)))


def affine_point(xi, alpha, basis):
    """Inverse of affine_coordinates."""
    basis = [np.asarray(x, dtype=complex) for x in basis]
    target = _embedded(xi, basis)
    spectrum = spectral_decompose(target)
    if -1 < alpha < 1 and spectrum.eigenvalues[0] <= 0:
        raise PositivityError(float(spectrum.eigenvalues[0]),
                              'embedded point is not positive definite, outside the image of l_alpha')
    return weight_matrix(apply_scalar_function(inverse_embedding_function(alpha), spectrum))


def affine_family(alpha, basis, name='affine'):
    """Chart xi -> sigma with l_alpha(sigma) = sum xi_i X_i, exact derivatives."""
    basis = [np.asarray(x, dtype=complex) for x in basis]
    g = inverse_embedding_function(alpha)

    def chart(xi):
        return affine_point(xi, alpha, basis).matrix

    def derivative(xi, i):
        return frechet_derivative(g, as_spectrum(_embedded(xi, basis)), basis[i])

    def second_derivative(xi, i, j):
        return second_frechet_derivative(g, as_spectrum(_embedded(xi, basis)), basis[i], basis[j])

    return ParametrizedFamily(
        name=name,
        param_dim=len(basis),
        chart=chart,
        derivative=derivative,
        second_derivative=second_derivative,
        on_states=False
    )
