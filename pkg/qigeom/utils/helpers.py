import logging

import numpy as np
from scipy.stats import unitary_group

from config.config import Config
from qigeom.models.models import GibbsFamily, KrausChannel, ParametrizedFamily
from qigeom.utils.errors import ChannelError, DimensionError, ParameterError
from qigeom.utils.matrix_core import (
    apply_scalar_function, exp_function, frechet_derivative, second_frechet_derivative,
    spectral_decompose, symmetrize
)

logger = logging.getLogger(__name__)

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

QUTRIT_BASE = np.diag([0.5, 0.3, 0.2]).astype(complex)


def pauli_matrices():
    return SIGMA_X, SIGMA_Y, SIGMA_Z


def pauli_basis():
    return IDENTITY2, SIGMA_X, SIGMA_Y, SIGMA_Z


def gell_mann_matrices():
    """The eight Gell-Mann matrices lambda_1..lambda_8."""
    l = np.zeros((8, 3, 3), dtype=complex)
    l[0][0, 1] = l[0][1, 0] = 1
    l[1][0, 1], l[1][1, 0] = -1j, 1j
    l[2][0, 0], l[2][1, 1] = 1, -1
    l[3][0, 2] = l[3][2, 0] = 1
    l[4][0, 2], l[4][2, 0] = -1j, 1j
    l[5][1, 2] = l[5][2, 1] = 1
    l[6][1, 2], l[6][2, 1] = -1j, 1j
    l[7] = np.diag([1, 1, -2]) / np.sqrt(3)
    return tuple(l)


def hermitian_basis(n):
    """Identity followed by the generalized Gell-Mann matrices: a real basis of the n x n Hermitian matrices."""
    basis = [np.eye(n, dtype=complex)]
    for j in range(n):
        for k in range(j + 1, n):
            sym = np.zeros((n, n), dtype=complex)
            sym[j, k] = sym[k, j] = 1
            anti = np.zeros((n, n), dtype=complex)
            anti[j, k], anti[k, j] = -1j, 1j
            basis.extend([sym, anti])
    for l in range(1, n):
        diag = np.zeros(n)
        diag[:l] = 1
        diag[l] = -l
        basis.append(np.diag(diag * np.sqrt(2 / (l * (l + 1)))).astype(complex))
    return basis


def default_rng(seed=None):
    return np.random.default_rng(Config.DEFAULT_SEED if seed is None else seed)


def spawn_rngs(seed, count):
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]


def random_unitary(n, rng):
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    return np.asarray(unitary_group.rvs(n, random_state=rng), dtype=complex)


def random_hermitian(n, rng, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * symmetrize(a) / np.sqrt(n)


def random_state(n, rng, floor=Config.SAMPLING_SPECTRAL_FLOOR):
    """Haar-rotated density matrix whose eigenvalues are all at least `floor`."""
    if n * floor >= 1:
        floor = 1 / (2 * n)
    weights = rng.dirichlet(np.ones(n))
    eigenvalues = floor + (1 - n * floor) * weights
    u = random_unitary(n, rng)
    return symmetrize(u @ np.diag(eigenvalues) @ u.conj().T)


def random_weight(n, rng, floor=Config.SAMPLING_SPECTRAL_FLOOR):
    return rng.uniform(0.5, 2.0) * random_state(n, rng, floor)


def random_tangent(n, rng, traceless=True):
    a = random_hermitian(n, rng)
    if traceless:
        a = a - np.trace(a) / n * np.eye(n)
    return a


def kron_states(a, b):
    return np.kron(a, b)


def partial_trace(matrix, dim_keep, dim_traced):
    """Trace out the second tensor factor."""
    if matrix.shape != (dim_keep * dim_traced, dim_keep * dim_traced):
        raise DimensionError(f'cannot split shape {matrix.shape} as {dim_keep} x {dim_traced}')
    return np.einsum('ijkj->ik', matrix.reshape(dim_keep, dim_traced, dim_keep, dim_traced))


# Families

def linear_family(name, offset, directions, on_states):
    """theta -> offset + sum theta_i D_i, with exact derivatives."""
    offset = np.asarray(offset, dtype=complex)
    directions = tuple(np.asarray(d, dtype=complex) for d in directions)
    zero = np.zeros_like(offset)

    def chart(theta):
        return offset + sum(t * d for t, d in zip(theta, directions))

    return ParametrizedFamily(
        name=name,
        param_dim=len(directions),
        chart=chart,
        derivative=lambda theta, i: directions[i],
        second_derivative=lambda theta, i, j: zero,
        on_states=on_states
    )


def bloch_family():
    return linear_family('qubit', IDENTITY2 / 2, [s / 2 for s in pauli_matrices()], True)


def qutrit_family():
    l = gell_mann_matrices()
    return linear_family('qutrit', QUTRIT_BASE, [l[0] / 2, l[4] / 2, l[7] / 2], True)


def bloch_weight_family():
    return linear_family('qubit-hat', np.zeros((2, 2)), pauli_basis(), False)


def qutrit_weight_family():
    l = gell_mann_matrices()
    return linear_family('qutrit-hat', QUTRIT_BASE, [np.eye(3) / 3, l[0] / 2, l[4] / 2], False)


def diagonal_family(n=2):
    """diag(theta_1, .., theta_{n-1}, 1 - sum theta)."""
    offset = np.zeros((n, n))
    offset[-1, -1] = 1
    directions = []
    for i in range(n - 1):
        d = np.zeros((n, n))
        d[i, i], d[-1, -1] = 1, -1
        directions.append(d)
    return linear_family('diagonal', offset, directions, True)


def linear_mixture_family(base, direction):
    return linear_family('mixture', base, [direction], np.isclose(np.trace(base).real, 1))


def exponential_chart(h, v):
    """theta -> exp(H + theta V) on the positive cone."""
    h = np.asarray(h, dtype=complex)
    v = np.asarray(v, dtype=complex)
    f = exp_function()

    def generator(theta):
        return h + theta[0] * v

    return ParametrizedFamily(
        name='exponential',
        param_dim=1,
        chart=lambda theta: apply_scalar_function(f, generator(theta)),
        derivative=lambda theta, i: frechet_derivative(f, generator(theta), v),
        second_derivative=lambda theta, i, j: second_frechet_derivative(f, generator(theta), v, v),
        on_states=False
    )


def gibbs_generator(family, theta):
    k = family.base_hamiltonian if family.base_hamiltonian is not None else np.zeros((family.dim, family.dim))
    return np.asarray(k, dtype=complex) + sum(t * y for t, y in zip(theta, family.observables))


def gibbs_state(family, theta):
    """exp(K) / Tr exp(K) with K = H0 + sum theta_i Y_i, shifted for stability."""
    spectrum = spectral_decompose(gibbs_generator(family, theta))
    weights = np.exp(spectrum.eigenvalues - spectrum.eigenvalues[-1])
    weights = weights / weights.sum()
    return symmetrize(spectrum.from_eigenbasis(np.diag(weights).astype(complex)))


def log_partition(family, theta):
    spectrum = spectral_decompose(gibbs_generator(family, theta))
    top = spectrum.eigenvalues[-1]
    return float(top + np.log(np.sum(np.exp(spectrum.eigenvalues - top))))


def gibbs_chart(family):
    f = exp_function()

    def derivative(theta, i):
        k = gibbs_generator(family, theta)
        spectrum = spectral_decompose(k)
        shifted = spectrum.eigenvalues - spectrum.eigenvalues[-1]
        z = np.sum(np.exp(shifted))
        sigma = gibbs_state(family, theta)
        y = family.observables[i]
        shift = np.eye(family.dim) * spectrum.eigenvalues[-1]
        moved = frechet_derivative(f, k - shift, y) / z
        return moved - sigma * np.trace(sigma @ y).real

    return ParametrizedFamily(
        name='gibbs',
        param_dim=family.param_dim,
        chart=lambda theta: gibbs_state(family, theta),
        derivative=derivative,
        on_states=True
    )


def qubit_gibbs_family():
    return GibbsFamily((SIGMA_Z,))


DOCUMENTED_FAMILIES = {
    'qubit': bloch_family,
    'qutrit': qutrit_family,
    'qubit-hat': bloch_weight_family,
    'qutrit-hat': qutrit_weight_family,
    'diagonal': diagonal_family
}

# Fixed base points at which the falsification witnesses are evaluated.
WITNESS_POINTS = {
    'qubit': (0.0, 0.0, 0.6),
    'qutrit': (0.0, 0.0, 0.0),
    'qubit-hat': (1.0, 0.0, 0.0, 0.6),
    'qutrit-hat': (0.0, 0.0, 0.0),
    'diagonal': (0.75,)
}

# Path-dependence pair on the Bloch ball: straight segment versus a detour.
PATH_START = np.array([0.7, 0.0, 0.0])
PATH_END = np.array([0.0, 0.7, 0.0])
PATH_DETOUR = np.array([0.0, 0.0, 0.7])


def documented_family(name, manifold='M'):
    if manifold == 'hat' and name in ('qubit', 'qutrit'):
        name = f'{name}-hat'
    if name not in DOCUMENTED_FAMILIES:
        raise ParameterError(f'unknown family {name!r}; expected one of {sorted(DOCUMENTED_FAMILIES)}')
    return DOCUMENTED_FAMILIES[name]()


def _random_direction(rng, d):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def sample_parameters(name, rng, count):
    points = []
    for _ in range(count):
        if name == 'qubit':
            points.append(rng.uniform(0.2, 0.7) * _random_direction(rng, 3))
        elif name == 'qubit-hat':
            points.append(np.concatenate([[rng.uniform(0.8, 1.2)], rng.uniform(0.1, 0.5) * _random_direction(rng, 3)]))
        elif name == 'qutrit':
            points.append(rng.uniform(-0.1, 0.1, size=3))
        elif name == 'qutrit-hat':
            points.append(np.concatenate([[rng.uniform(-0.3, 0.3)], rng.uniform(-0.1, 0.1, size=2)]))
        elif name == 'diagonal':
            points.append(np.array([rng.uniform(0.2, 0.8)]))
        else:
            raise ParameterError(f'no parameter sampler for family {name!r}')
    return points


def parameter_grid(name, rng, count=Config.GRID_POINTS):
    """Witness point first, then `count` seeded random interior points."""
    return [np.array(WITNESS_POINTS[name], dtype=float)] + sample_parameters(name, rng, count)


# Channels

def identity_channel(n):
    return KrausChannel((np.eye(n, dtype=complex),), name='identity')


def depolarizing_channel(n, t):
    if not 0 <= t <= 1:
        raise ParameterError(f'depolarizing strength {t} outside [0, 1]')
    ops = [np.sqrt(1 - t) * np.eye(n, dtype=complex)]
    for i in range(n):
        for j in range(n):
            op = np.zeros((n, n), dtype=complex)
            op[i, j] = np.sqrt(t / n)
            ops.append(op)
    return KrausChannel(tuple(ops), name=f'depolarizing({t:.6g})')


def _project_environment(isometry, dim_out, dim_env):
    ops = []
    for k in range(dim_env):
        bra = np.zeros((1, dim_env))
        bra[0, k] = 1
        ops.append(np.kron(np.eye(dim_out), bra) @ isometry)
    return tuple(ops)


def partial_trace_channel(dim_keep, dim_traced):
    ops = _project_environment(np.eye(dim_keep * dim_traced, dtype=complex), dim_keep, dim_traced)
    return KrausChannel(ops, name='partial-trace')


def random_partial_trace_channel(dim_keep, dim_env, rng):
    """Haar unitary on the joint system, then trace out the environment."""
    u = random_unitary(dim_keep * dim_env, rng)
    return KrausChannel(_project_environment(u, dim_keep, dim_env), name='random-partial-trace')


def random_stinespring_channel(dim_in, dim_out, dim_env, rng):
    if dim_out * dim_env < dim_in:
        raise ChannelError(f'environment too small: {dim_out} x {dim_env} < {dim_in}')
    isometry = random_unitary(dim_out * dim_env, rng)[:, :dim_in]
    return KrausChannel(_project_environment(isometry, dim_out, dim_env), name='random-stinespring')


def amplitude_damping_channel(gamma):
    if not 0 <= gamma <= 1:
        raise ParameterError(f'gamma {gamma} outside [0, 1]')
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return KrausChannel((k0, k1), name=f'amplitude-damping({gamma:.6g})')


def dephasing_channel(p):
    if not 0 <= p <= 1:
        raise ParameterError(f'dephasing probability {p} outside [0, 1]')
    k0 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex)
    k1 = np.array([[0, 0], [0, np.sqrt(p)]], dtype=complex)
    return KrausChannel((k0, k1), name=f'dephasing({p:.6g})')


def random_channel(n, rng, kind=None):
    """One channel from the monotonicity battery; `kind` picks the builder."""
    kind = kind or rng.choice(['depolarizing', 'stinespring'] + (['amplitude', 'dephasing'] if n == 2 else []))
    if kind == 'depolarizing':
        return depolarizing_channel(n, rng.uniform(0.05, 0.95))
    if kind == 'stinespring':
        return random_stinespring_channel(n, n, 2, rng)
    if kind == 'amplitude':
        return amplitude_damping_channel(rng.uniform(0.05, 0.95))
    if kind == 'dephasing':
        return dephasing_channel(rng.uniform(0.05, 0.95))
    raise ParameterError(f'unknown channel kind {kind!r}')
