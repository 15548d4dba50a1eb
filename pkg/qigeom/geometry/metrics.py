import logging

import numpy as np
from scipy.special import entr, exprel

from config.config import Config
from qigeom.models.models import MetricKernel, MonotoneFunctionSpec, MonotonicityReport, TangentVector
from qigeom.geometry.manifold import alpha_representation, weight_matrix
from qigeom.utils.errors import DimensionError, ParameterError, SymmetryError
from qigeom.utils.matrix_core import apply_scalar_function, frechet_derivative, log_function, symmetrize

logger = logging.getLogger(__name__)


# Monotone functions. Each is written in u = log x so that the removable
# singularity at x = 1 is evaluated exactly by exprel.

def wyd_function(p):
    p = float(p)
    if not 0 < p < 1:
        raise ParameterError(f'WYD parameter p={p} outside (0, 1)')

    def evaluate(x):
        u = np.log(x)
        return exprel(u) ** 2 / (exprel(p * u) * exprel((1 - p) * u))

    return MonotoneFunctionSpec(f'wyd:{p:g}', evaluate, claimed_monotone=True, parameter=p)


def bkm_function():
    return MonotoneFunctionSpec('bkm', lambda x: exprel(np.log(x)))


def bures_function():
    return MonotoneFunctionSpec('bures', lambda x: (1 + x) / 2)


def rld_function():
    return MonotoneFunctionSpec('rld', lambda x: 2 * x / (1 + x))


def builtin_functions(ps=(0.5,)):
    return [wyd_function(p) for p in ps] + [bkm_function(), bures_function(), rld_function()]


def perturbed_function(base, epsilon, name=None):
    """f(t) * (1 + eps * u^2 / (1 + u^2)) with u = log t; keeps symmetry and f(1) = 1."""
    def evaluate(x):
        u = np.log(x)
        return base.eval(x) * (1 + epsilon * u ** 2 / (1 + u ** 2))

    return MonotoneFunctionSpec(
        name or f'{base.name}*(1{epsilon:+g}bump)', evaluate, claimed_monotone=False, parameter=base.parameter
    )


def function_by_name(name, alpha=0.0):
    """'wyd' (p from alpha), 'wyd:<p>', 'bkm', 'bures' or 'rld'."""
    name = name.strip().lower()
    if name == 'wyd':
        if abs(alpha) == 1:
            return bkm_function()
        return wyd_function((1 + alpha) / 2)
    if name.startswith('wyd:'):
        try:
            return wyd_function(float(name[4:]))
        except ValueError:
            raise ParameterError(f'cannot parse WYD parameter in {name!r}')
    builders = {'bkm': bkm_function, 'bures': bures_function, 'rld': rld_function}
    if name not in builders:
        raise ParameterError(f'unknown metric {name!r}')
    return builders[name]()


def function_violations(f):
    """Largest symmetry and normalization errors of f on the sample grid."""
    grid = np.asarray(Config.SYMMETRY_GRID)
    values = f(grid)
    mirrored = grid * f(1 / grid)
    symmetry = float(np.max(np.abs(values - mirrored) / np.abs(values)))
    normalization = float(abs(f(np.array([1.0]))[0] - 1))
    return {'symmetry': symmetry, 'normalization': normalization}


def validate_function(f):
    violations = function_violations(f)
    if violations['symmetry'] > Config.FUNCTION_SYMMETRY_TOL:
        raise ParameterError(f'{f.name} violates f(t) = t f(1/t): relative error {violations["symmetry"]:.3e}')
    if violations['normalization'] > Config.FUNCTION_NORMALIZATION_TOL:
        raise ParameterError(f'{f.name} is not normalized: |f(1) - 1| = {violations["normalization"]:.3e}')
    return f


# Metrics

def petz_kernel(sigma, f):
    """c_ij = 1 / (l_j f(l_i / l_j)) over the eigenvalues of sigma."""
    sigma = weight_matrix(sigma)
    lam = sigma.spectrum.eigenvalues
    ratio = lam[:, None] / lam[None, :]
    coefficients = 1 / (lam[None, :] * f(ratio))
    # f(x) = x f(1/x) makes c symmetric
    asymmetry = float(np.max(np.abs(coefficients - coefficients.T) / np.abs(coefficients)))
    if asymmetry > Config.KERNEL_SYMMETRY_TOL:
        raise SymmetryError(asymmetry, Config.KERNEL_SYMMETRY_TOL,
                            f'{f.name} gives an asymmetric kernel: relative error {asymmetry:.3e}')
    return MetricKernel(sigma.spectrum, coefficients)


def _tangent_matrix(v, sigma):
    if isinstance(v, TangentVector):
        if v.base.matrix.shape != sigma.matrix.shape or not np.allclose(v.base.matrix, sigma.matrix, atol=1e-12):
            raise DimensionError('tangent vector is based at a different point')
        return v.mixture_rep
    v = np.asarray(v, dtype=complex)
    if v.shape != sigma.matrix.shape:
        raise DimensionError(f'tangent of shape {v.shape} at base of shape {sigma.matrix.shape}')
    return v


def metric_eval(sigma, f, a, b, scale=1.0, kernel=None):
    sigma = weight_matrix(sigma)
    kernel = kernel or petz_kernel(sigma, f)
    at = sigma.spectrum.to_eigenbasis(_tangent_matrix(a, sigma))
    bt = sigma.spectrum.to_eigenbasis(_tangent_matrix(b, sigma))
    return scale * float(np.real(np.sum(np.conj(at) * kernel.coefficients * bt)))


def metric_matrix(sigma, f, tangents, scale=1.0):
    """Gram matrix g(t_i, t_j) of a list of tangents."""
    sigma = weight_matrix(sigma)
    kernel = petz_kernel(sigma, f)
    d = len(tangents)
    gram = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            gram[i, j] = gram[j, i] = metric_eval(sigma, f, tangents[i], tangents[j], scale, kernel)
    return gram


def _as_tangent(v, rho):
    if isinstance(v, TangentVector):
        return v
    return TangentVector(rho, symmetrize(np.asarray(v, dtype=complex)))


def wyd_direct(rho, alpha, a, b):
    """Tr(A^(alpha) B^(-alpha))."""
    if not -1 < alpha < 1:
        raise ParameterError(f'alpha {alpha} outside (-1, 1); use bkm_direct for the limits')
    rho = weight_matrix(rho)
    a, b = _as_tangent(a, rho), _as_tangent(b, rho)
    return float(np.real(np.trace(alpha_representation(a, alpha) @ alpha_representation(b, -alpha))))


def bkm_direct(rho, a, b):
    """Tr(A^(-1) B^(1)): mixture representation against the derivative of log."""
    rho = weight_matrix(rho)
    a, b = _as_tangent(a, rho), _as_tangent(b, rho)
    return float(np.real(np.trace(a.mixture_rep @ frechet_derivative(log_function(), rho, b.mixture_rep))))


# Channels and monotonicity

def apply_channel(channel, matrix):
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (channel.dim_in, channel.dim_in):
        raise DimensionError(f'{channel.name} acts on {channel.dim_in}x{channel.dim_in}, got {matrix.shape}')
    return sum(k @ matrix @ k.conj().T for k in channel.kraus_ops)


def monotonicity_check(f, rho, a, channel):
    rho = weight_matrix(rho)
    a = _tangent_matrix(a, rho)
    rhs = metric_eval(rho, f, a, a)

    image = symmetrize(apply_channel(channel, rho.matrix))
    image_tangent = symmetrize(apply_channel(channel, a))
    regularized = False
    if np.linalg.eigvalsh(image)[0] < Config.CHANNEL_EIGENVALUE_FLOOR:
        n = channel.dim_out
        mixing = Config.CHANNEL_MIXING
        image = (1 - mixing) * image + mixing * np.eye(n) / n
        image_tangent = (1 - mixing) * image_tangent
        regularized = True
        logger.warning('%s output is near-singular; mixed with %.1e of the maximally mixed state', channel.name, mixing)

    try:
        lhs = metric_eval(weight_matrix(image), f, image_tangent, image_tangent)
    except ValueError as exc:
        logger.warning('monotonicity check inconclusive for %s under %s: %s', f.name, channel.name, exc)
        return MonotonicityReport(f.name, channel.name, float('nan'), rhs, regularized, inconclusive=True)

    logger.debug('%s under %s: lhs=%.6g rhs=%.6g', f.name, channel.name, lhs, rhs)
    return MonotonicityReport(f.name, channel.name, lhs, rhs, regularized)


# Entropies

def von_neumann_entropy(rho):
    rho = weight_matrix(rho)
    return float(np.sum(entr(rho.spectrum.eigenvalues)))


def relative_entropy(rho, sigma):
    """Tr rho (log rho - log sigma)."""
    rho = weight_matrix(rho)
    sigma = weight_matrix(sigma)
    log_rho = apply_scalar_function(log_function(), rho)
    log_sigma = apply_scalar_function(log_function(), sigma)
    return float(np.real(np.trace(rho.matrix @ (log_rho - log_sigma))))
