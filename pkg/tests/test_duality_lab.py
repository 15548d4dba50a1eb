import numpy as np
import pytest
from numpy.testing import assert_allclose

from config.config import Config
from qigeom.models.models import GibbsFamily, TangentVector
from qigeom.geometry.connections import segment_curve
from qigeom.geometry.manifold import affine_coordinates, family_point
from qigeom.geometry.metrics import bkm_direct, bkm_function, bures_function, rld_function, wyd_function
from qigeom.lab.duality_lab import (
    classify, convexity_failure_check, dual_coordinate_check, dual_function, dual_potential, duality_defect,
    entropy_projection_demo, gradient_coordinates, potential, potential_check, relative_entropy_taylor_check,
    trace_identity_check, transport_duality_check, uniqueness_scan
)
from qigeom.utils.errors import ParameterError
from qigeom.utils.helpers import (
    QUTRIT_BASE, SIGMA_X, SIGMA_Y, SIGMA_Z, bloch_family, bloch_weight_family, diagonal_family, gibbs_state,
    hermitian_basis, parameter_grid, pauli_basis, qutrit_family, qutrit_weight_family, random_state, random_tangent,
    random_weight
)

STATUS = Config.CASE_STATUS
HALF = np.eye(2, dtype=complex) / 2


def test_classify():
    assert classify(1e-7, True) == STATUS['PASS']
    assert classify(1e-3, True) == STATUS['INCONCLUSIVE']
    assert classify(0.5, True) == STATUS['FAIL']
    assert classify(0.5, False) == STATUS['PASS']
    assert classify(1e-7, False) == STATUS['FAIL']


def test_dual_function():
    assert dual_function(1.0).name == 'bkm'
    assert dual_function(-1.0).name == 'bkm'
    assert dual_function(0.5).name == 'wyd:0.75'


# Duality defect

@pytest.mark.parametrize('alpha', [-0.5, 0.0, 0.5])
def test_wyd_is_dual_on_the_qubit(alpha, rng):
    grid = parameter_grid('qubit', rng, 1)
    report = duality_defect(bloch_family(), grid, wyd_function((1 + alpha) / 2), alpha)
    assert report.defect <= Config.DUALITY_TOL
    assert report.per_triple_defects.shape == (2, 3, 3, 3)


def test_wyd_is_dual_on_the_qutrit(rng):
    grid = parameter_grid('qutrit', rng, 1)
    assert duality_defect(qutrit_family(), grid, wyd_function(0.75), 0.5).defect <= Config.DUALITY_TOL


def test_wyd_is_dual_on_the_cone(rng):
    grid = parameter_grid('qubit-hat', rng, 1)
    report = duality_defect(bloch_weight_family(), grid, wyd_function(0.25), -0.5, manifold='hat')
    assert report.defect <= Config.DUALITY_TOL
    assert report.manifold == 'hat'


@pytest.mark.parametrize('alpha', [-1.0, 1.0])
def test_bkm_is_dual_for_exponential_and_mixture(alpha, rng):
    grid = parameter_grid('qubit', rng, 1)
    assert duality_defect(bloch_family(), grid, bkm_function(), alpha).defect <= Config.DUALITY_TOL


@pytest.mark.parametrize('f, alpha', [
    (bures_function(), 0.0),
    (rld_function(), 0.0),
    (bkm_function(), 0.5),
    (bkm_function(), -0.5),
    (wyd_function(0.75), 0.0)
], ids=['bures', 'rld', 'bkm+', 'bkm-', 'wyd-mismatch'])
def test_other_metrics_are_not_dual(f, alpha, rng):
    grid = parameter_grid('qubit', rng, 1)
    assert duality_defect(bloch_family(), grid, f, alpha).defect >= Config.FALSIFICATION_GAP


def test_wyd_is_dual_on_the_qutrit_cone(rng):
    grid = parameter_grid('qutrit-hat', rng, 1)
    report = duality_defect(qutrit_weight_family(), grid, wyd_function(0.75), 0.5, manifold='hat')
    assert report.defect <= Config.DUALITY_TOL


def test_duality_defect_is_symmetric_under_the_dual_swap(rng):
    # swapping alpha with -alpha exchanges the roles of j and k
    grid = parameter_grid('qubit', rng, 1)
    forward = duality_defect(bloch_family(), grid, bures_function(), 0.5).per_triple_defects
    backward = duality_defect(bloch_family(), grid, bures_function(), -0.5).per_triple_defects
    assert_allclose(forward, backward.transpose(0, 1, 3, 2), atol=1e-9)
    assert np.max(np.abs(forward)) > Config.DUALITY_TOL


def test_duality_defect_needs_states_on_M():
    with pytest.raises(ParameterError):
        duality_defect(bloch_weight_family(), [[1.0, 0.0, 0.0, 0.2]], bkm_function(), 1.0)


def test_empty_grid_has_zero_defect():
    assert duality_defect(bloch_family(), [], bkm_function(), 1.0).defect == 0.0


# Transport duality

def _witness():
    family = bloch_weight_family()
    start, end = [0.5, 0.0, 0.0, 0.0], [0.5, 0.0, 0.0, 0.3]
    v = TangentVector(family_point(family, start).as_weight(), SIGMA_X)
    return segment_curve(family, start, end, 16, 'witness'), v


def test_transport_preserves_the_dual_metric():
    curve, v = _witness()
    report = transport_duality_check(curve, wyd_function(0.75), 0.5, v, v)
    assert report.deviation <= 1e-10
    assert report.initial_value == pytest.approx(4.0)


def test_transport_breaks_other_metrics():
    curve, v = _witness()
    assert transport_duality_check(curve, bures_function(), 0.0, v, v).deviation > 1e-2
    assert transport_duality_check(curve, bkm_function(), 0.5, v, v).deviation > 1e-2


# Potentials

@pytest.mark.parametrize('alpha', [-0.5, 0.0, 0.5])
def test_potential_hessian_is_the_metric(alpha, rng):
    basis = pauli_basis()
    xi = affine_coordinates(random_weight(2, rng), alpha, basis)
    report = potential_check(alpha, basis, xi)
    assert report.residual <= Config.HESSIAN_TOL
    assert report.affine_residual <= Config.AFFINE_TOL


def test_potential_check_rejects_boundary_alpha():
    with pytest.raises(ParameterError):
        potential_check(1.0, pauli_basis(), [1.0, 0.0, 0.0, 0.0])


def test_potential_values():
    assert potential(0.5, HALF) == pytest.approx(4 / 3)
    assert dual_potential(0.5, HALF) == pytest.approx(4.0)


def test_gradient_coordinates_at_maximally_mixed_state():
    # l_{-alpha}(I/2) at alpha = 0 is sqrt(2) I, so only the identity component survives
    assert_allclose(gradient_coordinates(0.0, pauli_basis(), HALF), [2 * np.sqrt(2), 0, 0, 0], atol=1e-14)


@pytest.mark.parametrize('alpha', [-0.5, 0.5])
def test_dual_coordinates(alpha, rng):
    basis = hermitian_basis(2)
    grid = [affine_coordinates(random_weight(2, rng), alpha, basis)]
    report = dual_coordinate_check(alpha, basis, grid)
    assert report.jacobian_residual <= Config.JACOBIAN_TOL
    assert report.closed_form_residual <= Config.LEGENDRE_TOL
    assert report.legendre_residual <= Config.LEGENDRE_TOL


def test_trace_identity_uses_the_full_metric(rng):
    basis = pauli_basis()
    xi = affine_coordinates(random_weight(2, rng), 0.5, basis)
    identity = trace_identity_check(0.5, basis, xi, 1, 2)
    assert identity['full_residual'] <= 1e-8 * max(1.0, abs(identity['full_rhs']))


def test_commutant_form_misses_off_diagonal_directions():
    basis = pauli_basis()
    xi = affine_coordinates(np.diag([0.7, 0.3]), 0.5, basis)
    identity = trace_identity_check(0.5, basis, xi, 1, 1)
    assert identity['commutant_rhs'] == pytest.approx(0.0, abs=1e-12)
    assert abs(identity['lhs']) > 1e-3
    assert identity['full_residual'] <= 1e-8 * abs(identity['lhs'])


# Uniqueness and convexity

def test_uniqueness_scan_on_the_qubit(rng):
    ensemble = [(bloch_family(), parameter_grid('qubit', rng, 1))]
    result = uniqueness_scan(0.0, ensemble)
    assert result.wyd_entry['status'] == STATUS['PASS']
    assert result.wyd_minimal
    scaled = next(entry for entry in result.entries if entry['role'] == 'scaled')
    assert scaled['name'] == '3*wyd:0.5'
    assert scaled['status'] == STATUS['PASS']
    for entry in result.entries:
        if entry['name'] in ('bures', 'rld'):
            assert entry['status'] == STATUS['PASS']
            assert not entry['expect_dual']


def test_uniqueness_scan_alpha_limit(rng):
    ensemble = [(bloch_family(), parameter_grid('qubit', rng, 1))]
    result = uniqueness_scan(0.999, ensemble)
    bkm = next(entry for entry in result.entries if entry['name'] == 'bkm')
    assert bkm['role'] == 'limit'
    assert bkm['threshold'] == Config.LIMIT_TREND_TOL
    assert bkm['defect'] <= Config.LIMIT_TREND_TOL
    assert bkm['status'] == STATUS['PASS']
    assert result.wyd_entry['status'] == STATUS['PASS']
    assert not result.inconclusive

    # the BKM defect shrinks as alpha approaches 1
    grid = ensemble[0][1]
    defects = [duality_defect(bloch_family(), grid, bkm_function(), alpha).defect for alpha in (0.9, 0.99, 0.999)]
    assert defects[0] > defects[1] > defects[2]


def test_bkm_is_an_ordinary_rival_away_from_the_limit(rng):
    ensemble = [(bloch_family(), parameter_grid('qubit', rng, 1))]
    roles = {entry['name']: entry['role'] for entry in uniqueness_scan(0.5, ensemble).entries}
    assert roles['bkm'] == 'builtin'


def test_convex_mixture_holds_classically():
    report = convexity_failure_check(0.0, [(diagonal_family(), [[0.3], [0.6]])], compute_bkm_defect=False)
    assert report.max_difference <= Config.CLASSICAL_TOL
    assert report.family == 'diagonal'


def test_convex_mixture_fails_on_the_qubit():
    report = convexity_failure_check(0.0, [(bloch_family(), [[0.0, 0.0, 0.6]])])
    assert report.max_difference >= Config.CONVEXITY_GAP
    assert report.bkm_defect >= Config.FALSIFICATION_GAP


def test_convex_mixture_is_exact_at_the_ends():
    report = convexity_failure_check(1.0, [(bloch_family(), [[0.0, 0.0, 0.6]])])
    assert report.max_difference <= Config.CLASSICAL_TOL
    assert report.bkm_defect == 0.0


# Entropy

def test_entropy_projection_matches_means(rng):
    rho = random_state(2, rng)
    report = entropy_projection_demo(rho, GibbsFamily((SIGMA_Z,)))
    assert report.converged
    assert report.mean_residual <= Config.MEAN_MATCH_TOL
    assert report.orthogonality_residual <= Config.ORTHOGONALITY_TOL
    sigma = gibbs_state(GibbsFamily((SIGMA_Z,)), report.theta)
    assert np.trace(sigma @ SIGMA_Z).real == pytest.approx(np.trace(rho @ SIGMA_Z).real, abs=1e-9)


def test_entropy_projection_of_a_family_member():
    family = GibbsFamily((SIGMA_X, SIGMA_Y))
    rho = gibbs_state(family, [0.3, -0.2])
    report = entropy_projection_demo(rho, family)
    assert_allclose(report.theta, [0.3, -0.2], atol=1e-8)
    assert report.relative_entropy == pytest.approx(0.0, abs=1e-12)


def test_entropy_projection_on_the_qutrit(rng):
    family = GibbsFamily((np.diag([1.0, 0.0, -1.0]), np.diag([0.0, 1.0, 0.0])))
    report = entropy_projection_demo(random_state(3, rng), family)
    assert report.converged
    assert report.orthogonality_residual <= Config.ORTHOGONALITY_TOL


def test_relative_entropy_taylor_expansion(rng):
    direction = random_tangent(3, rng)
    direction = direction / np.sqrt(bkm_direct(QUTRIT_BASE, direction, direction))
    check = relative_entropy_taylor_check(QUTRIT_BASE, direction)
    assert check['bkm'] == pytest.approx(1.0)
    assert check['one_sided_residual'] <= Config.TAYLOR_TOL
    assert check['symmetric_residual'] <= Config.TAYLOR_SYMMETRIC_TOL
