"""alpha-connections on the positive cone and on the state manifold.

On the cone the alpha-representation of the covariant derivative of a
coordinate field is simply the second derivative of l_alpha(sigma(theta)),
evaluated by the analytic chain rule D^2 l[s_i, s_j] + D l[s_ij]. On the
state manifold it is projected back onto the tangent space of the sphere
that l_alpha maps M into.
"""
import logging

import numpy as np

from config.config import Config
from qigeom.models.models import CovariantDerivativeResult, CurveSpec, TangentVector
from qigeom.geometry.manifold import (
    alpha_representation, chart_derivative, chart_second_derivative, embedding_function, family_point,
    family_tangent, representation_convert, sphere_project, tangency_residual
)
from qigeom.utils.errors import ParameterError
from qigeom.utils.matrix_core import frechet_derivative, second_frechet_derivative

logger = logging.getLogger(__name__)


def embedded_second_derivative(family, theta, i, j, alpha, base):
    f = embedding_function(alpha)
    first_i = chart_derivative(family, theta, i)
    first_j = chart_derivative(family, theta, j)
    second = chart_second_derivative(family, theta, i, j)
    return second_frechet_derivative(f, base, first_i, first_j) + frechet_derivative(f, base, second)


def ext_covariant_derivative(family, theta, i, j, alpha):
    theta = np.asarray(theta, dtype=float)
    base = family_point(family, theta).as_weight()
    alpha_rep = embedded_second_derivative(family, theta, i, j, alpha, base)
    mixture = representation_convert(base, alpha_rep, alpha, -1)
    return CovariantDerivativeResult(base, TangentVector(base, mixture), alpha_rep, alpha, projected=False)


def covariant_derivative_on_M(family, theta, i, j, alpha):
    if not family.on_states:
        raise ParameterError(f'{family.name} is not a family of states')
    theta = np.asarray(theta, dtype=float)
    rho = family_point(family, theta)
    raw = embedded_second_derivative(family, theta, i, j, alpha, rho)
    alpha_rep = sphere_project(rho, alpha, raw)
    mixture = representation_convert(rho, alpha_rep, alpha, -1)
    return CovariantDerivativeResult(rho, TangentVector(rho, mixture), alpha_rep, alpha, projected=True)


def covariant_derivative(family, theta, i, j, alpha, manifold='M'):
    if manifold == 'M':
        return covariant_derivative_on_M(family, theta, i, j, alpha)
    return ext_covariant_derivative(family, theta, i, j, alpha)


def convex_mixture_derivative(family, theta, i, j, alpha):
    """((1+alpha)/2) nabla^(1) + ((1-alpha)/2) nabla^(-1), combined in the mixture representation."""
    exponential = covariant_derivative_on_M(family, theta, i, j, 1.0)
    mixture = covariant_derivative_on_M(family, theta, i, j, -1.0)
    rho = exponential.base
    combined = (1 + alpha) / 2 * exponential.vector.mixture_rep + (1 - alpha) / 2 * mixture.vector.mixture_rep
    vector = TangentVector(rho, combined)
    return CovariantDerivativeResult(rho, vector, alpha_representation(vector, alpha), alpha, projected=True)


# Transport

def _check_continuity(points):
    for previous, current in zip(points, points[1:]):
        jump = float(np.linalg.norm(current.matrix - previous.matrix))
        if jump > Config.MAX_CURVE_JUMP:
            raise ParameterError(f'curve jumps by {jump:.3g} in one step; increase step_count')


def parallel_transport_ext(curve, v, alpha):
    """Flat transport on the cone: keep the alpha-representation, reinterpret it at the endpoint."""
    start = family_point(curve.family, curve.theta(0.0)).as_weight()
    end = family_point(curve.family, curve.theta(1.0)).as_weight()
    if not np.allclose(v.base.matrix, start.matrix, atol=1e-12):
        raise ParameterError('vector is not based at the start of the curve')
    carried = alpha_representation(TangentVector(start, v.mixture_rep), alpha)
    return TangentVector(end, representation_convert(end, carried, alpha, -1))


def _projected_transport(curve, w, alpha, step_count):
    points = [family_point(curve.family, curve.theta(t)) for t in curve.times(step_count)]
    _check_continuity(points)
    for rho in points[1:]:
        w = sphere_project(rho, alpha, w)
    return points[-1], w


def parallel_transport_on_M(curve, v, alpha, step_count=None, extrapolate=True):
    """Identity map followed by the sphere projection at every step.

    The discrete transport is first order in the step, so the result is
    Richardson-extrapolated from step_count and step_count/2.
    """
    if not curve.family.on_states:
        raise ParameterError(f'{curve.family.name} is not a family of states')
    step_count = step_count or curve.step_count
    start = family_point(curve.family, curve.theta(0.0))
    if not np.allclose(v.base.matrix, start.matrix, atol=1e-12):
        raise ParameterError('vector is not based at the start of the curve')
    carried = alpha_representation(TangentVector(start, v.mixture_rep), alpha)

    end, fine = _projected_transport(curve, carried, alpha, step_count)
    if extrapolate and step_count >= 2 and step_count % 2 == 0:
        _, coarse = _projected_transport(curve, carried, alpha, step_count // 2)
        fine = 2 * fine - coarse
    residual = tangency_residual(end, alpha, fine)
    logger.debug('transport along %s with %d steps, tangency residual %.3e', curve.name, step_count, residual)
    return TangentVector(end, representation_convert(end, fine, alpha, -1))


def parallel_transport(curve, v, alpha, manifold='M', step_count=None):
    if manifold == 'M':
        return parallel_transport_on_M(curve, v, alpha, step_count)
    return parallel_transport_ext(curve, v, alpha)


def holonomy_gap(first, second, v, alpha, step_count=None):
    """Distance between v transported on M along two curves with common endpoints."""
    ends = [family_point(curve.family, curve.theta(1.0)).matrix for curve in (first, second)]
    if not np.allclose(ends[0], ends[1], atol=1e-12):
        raise ParameterError(f'curves {first.name} and {second.name} end at different points')
    carried = [parallel_transport_on_M(curve, v, alpha, step_count) for curve in (first, second)]
    return float(np.linalg.norm(carried[0].mixture_rep - carried[1].mixture_rep))


def segment_curve(family, start, end, step_count=Config.TRANSPORT_STEPS, name='segment'):
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    return CurveSpec(family, lambda t: start + t * (end - start), step_count, name)


def polygon_curve(family, vertices, step_count=Config.TRANSPORT_STEPS, name='polygon'):
    """Piecewise linear path through the vertices, uniform in t per segment."""
    vertices = [np.asarray(v, dtype=float) for v in vertices]
    pieces = len(vertices) - 1

    def path(t):
        k = min(int(t * pieces), pieces - 1)
        s = t * pieces - k
        return vertices[k] + s * (vertices[k + 1] - vertices[k])

    return CurveSpec(family, path, step_count, name)


def transport_derivative(family, theta, i, j, alpha, h=1e-3, step_count=16):
    """Covariant derivative recovered by transporting the field d_j back from theta +- h e_i."""
    theta = np.asarray(theta, dtype=float)
    manifold = 'M' if family.on_states else 'hat'
    e = np.zeros(family.param_dim)
    e[i] = 1.0
    base = family_point(family, theta)
    if manifold == 'hat':
        base = base.as_weight()

    def carried_back(shift):
        vector = family_tangent(family, theta + shift * e, j)
        if manifold == 'hat':
            vector = TangentVector(vector.base.as_weight(), vector.mixture_rep)
        curve = segment_curve(family, theta + shift * e, theta, step_count)
        return parallel_transport(curve, vector, alpha, manifold).mixture_rep

    derivative = (carried_back(h) - carried_back(-h)) / (2 * h)
    return TangentVector(base, derivative)


def flatness_check(alpha, family, theta):
    """Largest mixture norm of the cone covariant derivative over all index pairs."""
    norms = np.zeros((family.param_dim, family.param_dim))
    for i in range(family.param_dim):
        for j in range(family.param_dim):
            result = ext_covariant_derivative(family, theta, i, j, alpha)
            norms[i, j] = np.linalg.norm(result.vector.mixture_rep)
    return {
        'alpha': alpha,
        'family': family.name,
        'theta': np.asarray(theta, dtype=float).tolist(),
        'max_norm': float(np.max(norms))
    }
