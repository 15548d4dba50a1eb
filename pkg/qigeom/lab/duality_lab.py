import logging

import numpy as np
from sklearn.linear_model import LinearRegression

from config.config import Config
from qigeom.models.models import (
    ConvexityReport, CurveSpec, DualCoordinateReport, DualityReport, EntropyProjectionReport, PotentialReport,
    TangentVector, TransportDualityReport, UniquenessScanResult
)
from qigeom.geometry.connections import (
    convex_mixture_derivative, covariant_derivative, covariant_derivative_on_M, embedded_second_derivative,
    flatness_check, parallel_transport
)
from qigeom.geometry.manifold import (
    affine_coordinates, affine_family, chart_derivative, embed, embedding_function, family_point, family_tangent,
    weight_matrix
)
from qigeom.geometry.metrics import (
    bkm_direct, bkm_function, builtin_functions, metric_eval, metric_matrix, perturbed_function,
    petz_kernel, relative_entropy, validate_function, wyd_function
)
from qigeom.utils.errors import LabError, ParameterError
from qigeom.utils.helpers import gibbs_chart, gibbs_state, log_partition
from qigeom.utils.matrix_core import commutant_split, frechet_derivative, hs_inner

logger = logging.getLogger(__name__)

STATUS = Config.CASE_STATUS


def classify(defect, expect_dual, tol=Config.DUALITY_TOL, gap=Config.FALSIFICATION_GAP):
    """pass/fail/inconclusive for a defect against the expected duality verdict."""
    if tol < defect < gap:
        return STATUS['INCONCLUSIVE']
    dual = defect <= tol
    return STATUS['PASS'] if dual == expect_dual else STATUS['FAIL']


def dual_function(alpha):
    """The metric for which the +-alpha connections are expected to be dual."""
    if abs(alpha) == 1:
        return bkm_function()
    return wyd_function((1 + alpha) / 2)


# Duality defect

def _point(family, theta, manifold):
    point = family_point(family, theta)
    return point if manifold == 'M' else point.as_weight()


def _tangents(family, theta, manifold):
    point = _point(family, theta, manifold)
    return point, [TangentVector(point, family_tangent(family, theta, k).mixture_rep)
                   for k in range(family.param_dim)]


def _metric_derivative(family, theta, f, manifold, scale):
    """d_i g_jk by the five-point central stencil."""
    d = family.param_dim
    derivative = np.zeros((d, d, d))
    for i in range(d):
        h = Config.METRIC_DERIVATIVE_STEP * max(1.0, abs(theta[i]))
        e = np.zeros(d)
        e[i] = h
        gram = {}
        for m in (-2, -1, 1, 2):
            point, tangents = _tangents(family, theta + m * e, manifold)
            gram[m] = metric_matrix(point, f, tangents, scale)
        derivative[i] = (-gram[2] + 8 * gram[1] - 8 * gram[-1] + gram[-2]) / (12 * h)
    return derivative


def _triple_defects(family, theta, f, alpha, dual_alpha, manifold, scale):
    d = family.param_dim
    point, tangents = _tangents(family, theta, manifold)
    kernel = petz_kernel(point, f)

    def g(a, b):
        return metric_eval(point, f, a, b, scale, kernel)

    forward = [[covariant_derivative(family, theta, i, j, alpha, manifold).vector.mixture_rep
                for j in range(d)] for i in range(d)]
    backward = [[covariant_derivative(family, theta, i, k, dual_alpha, manifold).vector.mixture_rep
                 for k in range(d)] for i in range(d)]
    dg = _metric_derivative(family, theta, f, manifold, scale)

    defects = np.zeros((d, d, d))
    for i in range(d):
        for j in range(d):
            for k in range(d):
                defects[i, j, k] = (dg[i, j, k] - g(forward[i][j], tangents[k].mixture_rep)
                                    - g(tangents[j].mixture_rep, backward[i][k]))
    return defects


def duality_defect(family, grid, f, alpha, manifold='M', scale=1.0, dual_alpha=None, seed=None):
    """d_i g_jk - g(nabla^alpha_i d_j, d_k) - g(d_j, nabla^dual_i d_k) over the grid."""
    if manifold == 'M' and not family.on_states:
        raise ParameterError(f'{family.name} is not a family of states; use manifold="hat"')
    dual_alpha = -alpha if dual_alpha is None else dual_alpha
    grid = [np.asarray(theta, dtype=float) for theta in grid]
    per_point = [_triple_defects(family, theta, f, alpha, dual_alpha, manifold, scale) for theta in grid]
    report = DualityReport(
        metric_name=f.name,
        alpha=alpha,
        per_triple_defects=np.array(per_point),
        grid=np.array(grid),
        manifold=manifold,
        family=family.name,
        scale=scale,
        seed=seed
    )
    logger.info('duality defect %s alpha=%g on %s/%s: %.3e', f.name, alpha, family.name, manifold, report.defect)
    return report


# Transport duality

def _sub_curve(curve, t):
    return CurveSpec(curve.family, lambda s: curve.path(s * t), curve.step_count, curve.name)


def transport_duality_check(curve, f, alpha, y, z, manifold='hat', samples=8):
    """Track g(tau^alpha Y, tau^-alpha Z) along the curve."""
    start = _point(curve.family, curve.theta(0.0), manifold)
    initial = metric_eval(start, f, y.mixture_rep, z.mixture_rep)
    times = np.linspace(0.0, 1.0, samples + 1)[1:]
    values = []
    for t in times:
        piece = _sub_curve(curve, t)
        carried_y = parallel_transport(piece, y, alpha, manifold)
        carried_z = parallel_transport(piece, z, -alpha, manifold)
        values.append(metric_eval(carried_y.base, f, carried_y.mixture_rep, carried_z.mixture_rep))
    return TransportDualityReport(f.name, alpha, initial, np.array(values), times, manifold)


# Potentials and dual coordinates

def potential(alpha, sigma):
    """Psi(theta) = (2/(1+alpha)) Tr sigma."""
    return 2 / (1 + alpha) * weight_matrix(sigma).trace


def dual_potential(alpha, sigma):
    """Phi = (2/(1-alpha)) Tr sigma, the Legendre partner of the potential."""
    return 2 / (1 - alpha) * weight_matrix(sigma).trace


def gradient_coordinates(alpha, basis, sigma):
    """eta_i = d Psi / d xi_i = Tr(X_i l_{-alpha}(sigma))."""
    dual = embed(sigma, -alpha)
    return np.array([hs_inner(x, dual) for x in basis], dtype=float)


def _check_flat(family, alpha, xi, flatness_tol):
    flatness = flatness_check(alpha, family, xi)
    if flatness['max_norm'] > flatness_tol:
        raise ParameterError(f'coordinates are not alpha-affine: covariant derivative norm {flatness["max_norm"]:.3e}')


def _fd_hessian(func, x, h):
    d = len(x)
    hessian = np.zeros((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        hessian[i, i] = (func(x + ei) - 2 * func(x) + func(x - ei)) / h ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h
            hessian[i, j] = hessian[j, i] = (func(x + ei + ej) - func(x + ei - ej)
                                             - func(x - ei + ej) + func(x - ei - ej)) / (4 * h ** 2)
    return hessian


def potential_check(alpha, basis, xi, seed=Config.DEFAULT_SEED, flatness_tol=1e-6, samples=None):
    if not -1 < alpha < 1:
        raise ParameterError(f'alpha {alpha} outside (-1, 1)')
    basis = [np.asarray(x, dtype=complex) for x in basis]
    xi = np.asarray(xi, dtype=float)
    family = affine_family(alpha, basis)
    _check_flat(family, alpha, xi, flatness_tol)

    def psi(point):
        return potential(alpha, family_point(family, point))

    h = Config.SECOND_DERIVATIVE_STEP * max(1.0, float(np.max(np.abs(xi))))
    hessian = _fd_hessian(psi, xi, h)
    sigma = family_point(family, xi)
    tangents = [chart_derivative(family, xi, i) for i in range(len(basis))]
    metric = metric_matrix(sigma, wyd_function((1 + alpha) / 2), tangents)

    # eta against a known (-alpha)-affine system must be an affine map
    rng = np.random.default_rng(seed)
    count = samples or 2 * len(basis) + 2
    etas, zetas = [], []
    for _ in range(count):
        point = xi + rng.uniform(-0.05, 0.05, size=len(xi)) * max(1.0, float(np.max(np.abs(xi))))
        try:
            shifted = family_point(family, point)
        except LabError:
            continue
        etas.append(gradient_coordinates(alpha, basis, shifted))
        zetas.append(affine_coordinates(shifted, -alpha, basis))
    regression = LinearRegression().fit(np.array(zetas), np.array(etas))
    affine_residual = float(np.max(np.abs(regression.predict(np.array(zetas)) - np.array(etas))))

    return PotentialReport(alpha, hessian, metric, affine_residual)


def _damped_newton(objective, gradient, hessian, x0, max_iter=Config.NEWTON_MAX_ITER, tol=Config.NEWTON_TOL):
    """Newton's method with backtracking; stops when the gradient max-norm drops below tol."""
    x = np.asarray(x0, dtype=float)
    grad = gradient(x)
    for iteration in range(1, max_iter + 1):
        if np.max(np.abs(grad)) <= tol:
            return x, iteration - 1, True, float(np.max(np.abs(grad)))
        step = np.linalg.solve(hessian(x), -grad)
        value = objective(x)
        t = 1.0
        while t > 1e-10:
            candidate = x + t * step
            try:
                if objective(candidate) <= value + 1e-4 * t * float(grad @ step):
                    break
            except LabError:
                pass
            t /= 2
        x = x + t * step
        grad = gradient(x)
    converged = np.max(np.abs(grad)) <= tol
    return x, max_iter, bool(converged), float(np.max(np.abs(grad)))


def dual_coordinate_check(alpha, basis, grid, seed=Config.DEFAULT_SEED):
    """Jacobian of eta against the metric, and the Legendre relation Psi + Phi = xi . eta."""
    if not -1 < alpha < 1:
        raise ParameterError(f'alpha {alpha} outside (-1, 1)')
    basis = [np.asarray(x, dtype=complex) for x in basis]
    family = affine_family(alpha, basis)
    f = wyd_function((1 + alpha) / 2)
    rng = np.random.default_rng(seed)
    jacobian_residual = legendre_residual = closed_form_residual = 0.0

    def eta(point):
        return gradient_coordinates(alpha, basis, family_point(family, point))

    def psi(point):
        return potential(alpha, family_point(family, point))

    def metric_at(point):
        tangents = [chart_derivative(family, point, i) for i in range(len(basis))]
        return metric_matrix(family_point(family, point), f, tangents)

    for xi in grid:
        xi = np.asarray(xi, dtype=float)
        d = len(xi)
        h = Config.FIRST_DERIVATIVE_STEP * max(1.0, float(np.max(np.abs(xi))))
        jacobian = np.empty((d, d))
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            jacobian[:, j] = (eta(xi + e) - eta(xi - e)) / (2 * h)
        metric = metric_at(xi)
        jacobian_residual = max(jacobian_residual, float(np.max(np.abs(jacobian - metric))))

        sigma = family_point(family, xi)
        target = eta(xi)
        pairing = float(xi @ target)
        closed_form_residual = max(closed_form_residual,
                                   abs(psi(xi) + dual_potential(alpha, sigma) - pairing))

        # Phi(eta) = sup_x (x . eta - Psi(x)), from a perturbed start
        start = xi + rng.uniform(-0.02, 0.02, size=d) * max(1.0, float(np.max(np.abs(xi))))
        optimum, _, converged, _ = _damped_newton(
            lambda x: psi(x) - x @ target,
            lambda x: eta(x) - target,
            metric_at,
            start
        )
        if not converged:
            logger.warning('numeric Legendre transform did not converge at xi=%s', xi.tolist())
        numeric_phi = float(optimum @ target) - psi(optimum)
        legendre_residual = max(legendre_residual, abs(psi(xi) + numeric_phi - pairing))

    return DualCoordinateReport(alpha, jacobian_residual, legendre_residual, closed_form_residual)


def trace_identity_check(alpha, basis, xi, i, j):
    """Tr(l_alpha d_i d_j l_{-alpha}) against the full metric and the commutant-only form."""
    basis = [np.asarray(x, dtype=complex) for x in basis]
    family = affine_family(alpha, basis)
    xi = np.asarray(xi, dtype=float)
    sigma = family_point(family, xi)
    factor = 2 * alpha / (1 - alpha)

    lhs = hs_inner(embed(sigma, alpha), embedded_second_derivative(family, xi, i, j, -alpha, sigma))
    tangents = [TangentVector(sigma, chart_derivative(family, xi, k)) for k in (i, j)]
    full = factor * metric_eval(sigma, wyd_function((1 + alpha) / 2), tangents[0], tangents[1])

    minus = commutant_split(sigma, frechet_derivative(embedding_function(-alpha), sigma, tangents[0].mixture_rep))
    plus = commutant_split(sigma, frechet_derivative(embedding_function(alpha), sigma, tangents[1].mixture_rep))
    commutant = factor * hs_inner(minus.commutant_part, plus.commutant_part)

    return {
        'alpha': alpha,
        'indices': [i, j],
        'lhs': float(lhs),
        'full_rhs': float(full),
        'commutant_rhs': float(commutant),
        'full_residual': abs(lhs - full),
        'commutant_residual': abs(lhs - commutant)
    }


# Uniqueness scan

def _near_limit(alpha):
    return 0 < 1 - abs(alpha) <= Config.LIMIT_TREND_WINDOW


def _candidates(alpha, epsilons, scales):
    dual = dual_function(alpha)
    entries = [(dual, 1.0, 'wyd', True)]
    others = [f for f in builtin_functions() if f.name not in ('wyd:0.5', dual.name)]
    entries += [(f, 1.0, 'limit' if f.name == 'bkm' and _near_limit(alpha) else 'builtin', False) for f in others]
    entries += [(perturbed_function(dual, eps), 1.0, 'perturbed', False) for eps in epsilons]
    entries += [(dual, c, 'scaled', True) for c in scales]
    return entries


def _limit_status(defect):
    return STATUS['PASS'] if defect <= Config.LIMIT_TREND_TOL else STATUS['FAIL']


def uniqueness_scan(alpha, ensemble, tol=Config.DUALITY_TOL, gap=Config.FALSIFICATION_GAP,
                    epsilons=(0.25, -0.2), scales=(3.0,), manifold='M', candidates=None):
    """Duality defect of every candidate metric for the +-alpha connections.

    `ensemble` is a list of (family, grid). `candidates` overrides the default
    battery with (function, scale, role, expect_dual) tuples. Close to |alpha| = 1
    BKM gets the role 'limit': it passes while its defect stays below
    LIMIT_TREND_TOL.
    """
    entries = []
    for f, scale, role, expect_dual in candidates or _candidates(alpha, epsilons, scales):
        validate_function(f)
        defect = max(duality_defect(family, grid, f, alpha, manifold, scale).defect for family, grid in ensemble)
        if role == 'limit':
            status, threshold = _limit_status(defect), Config.LIMIT_TREND_TOL
        else:
            status, threshold = classify(defect, expect_dual, tol, gap), tol if expect_dual else gap
        if status == STATUS['INCONCLUSIVE']:
            logger.warning('uniqueness scan: %s (scale %g) is inconclusive with defect %.3e', f.name, scale, defect)
        entries.append({
            'name': f.name if scale == 1 else f'{scale:g}*{f.name}',
            'role': role,
            'scale': scale,
            'defect': defect,
            'expect_dual': expect_dual,
            'threshold': threshold,
            'status': status
        })
    return UniquenessScanResult(alpha, entries, tol, gap)


# Convex-combination failure

def convexity_failure_check(alpha, ensemble, compute_bkm_defect=True):
    """Max mixture-norm gap between nabla^alpha and the mixture of nabla^(+1), nabla^(-1)."""
    difference = 0.0
    bkm_defect = 0.0
    names = []
    for family, grid in ensemble:
        names.append(family.name)
        for theta in grid:
            for i in range(family.param_dim):
                for j in range(family.param_dim):
                    direct = covariant_derivative_on_M(family, theta, i, j, alpha).vector.mixture_rep
                    mixed = convex_mixture_derivative(family, theta, i, j, alpha).vector.mixture_rep
                    difference = max(difference, float(np.linalg.norm(direct - mixed)))
        if compute_bkm_defect and abs(alpha) != 1:
            bkm_defect = max(bkm_defect, duality_defect(family, grid, bkm_function(), alpha).defect)
    return ConvexityReport(alpha, difference, bkm_defect, ','.join(names))


# Entropy

def entropy_projection_demo(rho, gibbs, max_iter=Config.NEWTON_MAX_ITER, tol=Config.NEWTON_TOL):
    """e-projection of rho onto a Gibbs family by damped Newton on S(rho | sigma(theta))."""
    rho = weight_matrix(rho)
    chart = gibbs_chart(gibbs)
    means = np.array([np.trace(rho.matrix @ y).real for y in gibbs.observables])
    entropy_part = -float(np.real(np.trace(rho.matrix @ embed(rho, 1))))

    def objective(theta):
        generator_mean = float(theta @ means)
        if gibbs.base_hamiltonian is not None:
            generator_mean += float(np.trace(rho.matrix @ gibbs.base_hamiltonian).real)
        return -entropy_part - generator_mean + log_partition(gibbs, theta)

    def model_means(theta):
        sigma = gibbs_state(gibbs, theta)
        return np.array([np.trace(sigma @ y).real for y in gibbs.observables])

    def gradient(theta):
        return model_means(theta) - means

    def hessian(theta):
        d = gibbs.param_dim
        h = np.empty((d, d))
        for j in range(d):
            derivative = chart.derivative(theta, j)
            for i in range(d):
                h[i, j] = np.trace(gibbs.observables[i] @ derivative).real
        return (h + h.T) / 2

    theta, iterations, converged, gradient_norm = _damped_newton(
        objective, gradient, hessian, np.zeros(gibbs.param_dim), max_iter, tol
    )
    if not converged:
        logger.warning('entropy projection did not converge after %d iterations, gradient %.3e',
                       iterations, gradient_norm)

    sigma = weight_matrix(gibbs_state(gibbs, theta))
    segment = rho.matrix - sigma.matrix
    orthogonality = max(abs(bkm_direct(sigma, segment, chart.derivative(theta, i)))
                        for i in range(gibbs.param_dim))
    return EntropyProjectionReport(
        theta=theta,
        relative_entropy=relative_entropy(rho, sigma),
        mean_residual=float(np.max(np.abs(gradient(theta)))),
        orthogonality_residual=float(orthogonality),
        iterations=iterations,
        converged=converged,
        gradient_norm=gradient_norm
    )


def relative_entropy_taylor_check(rho, direction, t=1e-2):
    """S(rho | rho + tD) against t^2/2 times the BKM norm of D."""
    rho = weight_matrix(rho)
    direction = np.asarray(direction, dtype=complex)
    g = bkm_direct(rho, direction, direction)
    forward = relative_entropy(rho, rho.matrix + t * direction)
    backward = relative_entropy(rho, rho.matrix - t * direction)
    return {
        't': t,
        'bkm': g,
        'one_sided_residual': abs(forward - t ** 2 * g / 2),
        'symmetric_residual': abs((forward + backward) / t ** 2 - g) / g
    }
