import numpy as np
import pytest
from hypothesis import given
from hypothesis.strategies import integers, sampled_from
from numpy.testing import assert_allclose

from qigeom.models.models import GibbsFamily, ParametrizedFamily, TangentVector
from qigeom.geometry.manifold import (
    affine_coordinates, affine_point, alpha_embed, alpha_representation, chart_derivative, embed, family_point,
    family_tangent, representation_convert, sphere_project, state_matrix, tangency_residual, weight_matrix
)
from qigeom.utils.errors import ChartError, DimensionError, ParameterError, PositivityError, TraceError
from qigeom.utils.helpers import (
    SIGMA_X, SIGMA_Z, bloch_family, diagonal_family, gibbs_chart, hermitian_basis, pauli_basis, qutrit_family,
    random_state, random_tangent, random_weight, sample_parameters
)

HALF = np.eye(2, dtype=complex) / 2
SKEWED = np.diag([0.75, 0.25]).astype(complex)


def test_embedding_of_maximally_mixed_qubit():
    assert_allclose(alpha_embed(HALF, 0.0), np.sqrt(2) * np.eye(2), atol=1e-15)


def test_embedding_of_diagonal_state():
    assert_allclose(alpha_embed(np.diag([0.25, 0.75]), 0.0), np.diag([1.0, np.sqrt(3)]), atol=1e-15)


def test_embedding_limits():
    assert_allclose(embed(SKEWED, -1.0), SKEWED, atol=1e-15)
    assert_allclose(embed(SKEWED, 1.0), np.diag(np.log([0.75, 0.25])), atol=1e-15)
    with pytest.raises(ParameterError):
        alpha_embed(SKEWED, 1.0)


@given(integers(min_value=0, max_value=2 ** 32 - 1), sampled_from([2, 3, 4]))
def test_zero_embedding_has_norm_two(seed, n):
    rho = random_state(n, np.random.default_rng(seed))
    assert np.linalg.norm(alpha_embed(rho, 0.0)) == pytest.approx(2.0, rel=1e-12)


def test_mixture_representation_is_unchanged():
    v = TangentVector(state_matrix(SKEWED), SIGMA_X)
    assert_allclose(alpha_representation(v, -1.0), SIGMA_X)


def test_exponential_representation_scales_off_diagonal():
    v = TangentVector(state_matrix(SKEWED), SIGMA_X)
    assert_allclose(alpha_representation(v, 1.0), 2 * np.log(3) * SIGMA_X, atol=1e-14)


def test_zero_representation_at_maximally_mixed_state():
    v = TangentVector(state_matrix(HALF), SIGMA_Z)
    assert_allclose(alpha_representation(v, 0.0), np.sqrt(2) * SIGMA_Z, atol=1e-14)


def test_representation_convert_examples():
    assert_allclose(representation_convert(HALF, SIGMA_X, 0.3, 0.3), SIGMA_X)
    assert_allclose(representation_convert(HALF, SIGMA_X, -1.0, 0.0), np.sqrt(2) * SIGMA_X, atol=1e-14)


@given(integers(min_value=0, max_value=2 ** 32 - 1))
def test_representation_round_trip(seed):
    rng = np.random.default_rng(seed)
    base = weight_matrix(random_weight(3, rng))
    w = random_tangent(3, rng, traceless=False)
    there = representation_convert(base, w, -1.0, 0.5)
    assert_allclose(representation_convert(base, there, 0.5, -1.0), w, atol=1e-9)


def test_representation_convert_checks_tangency():
    with pytest.raises(DimensionError):
        representation_convert(state_matrix(HALF), np.eye(2), -1.0, 0.0)


def test_sphere_projection_examples():
    assert_allclose(sphere_project(HALF, 0.0, np.eye(2)), 0, atol=1e-15)
    assert_allclose(sphere_project(SKEWED, 0.0, SIGMA_X), SIGMA_X, atol=1e-15)


@given(integers(min_value=0, max_value=2 ** 32 - 1), sampled_from([-1.0, -0.5, 0.0, 0.5, 1.0]))
def test_sphere_projection_is_idempotent_and_tangent(seed, alpha):
    rng = np.random.default_rng(seed)
    rho = state_matrix(random_state(3, rng))
    a = random_tangent(3, rng, traceless=False)
    once = sphere_project(rho, alpha, a)
    assert tangency_residual(rho, alpha, once) <= 1e-12
    assert_allclose(sphere_project(rho, alpha, once), once, atol=1e-12)


@pytest.mark.parametrize('family', [bloch_family(), qutrit_family()], ids=lambda f: f.name)
@pytest.mark.parametrize('alpha', [-0.5, 0.0, 0.5, 1.0])
def test_family_tangents_are_tangent_in_every_representation(family, alpha, rng):
    theta = sample_parameters(family.name, rng, 1)[0]
    for i in range(family.param_dim):
        v = family_tangent(family, theta, i)
        assert tangency_residual(v.base, alpha, alpha_representation(v, alpha)) <= 1e-9


def test_diagonal_family_tangent():
    v = family_tangent(diagonal_family(), [0.7], 0)
    assert_allclose(v.mixture_rep, np.diag([1.0, -1.0]))


def test_gibbs_curve_tangent_at_origin():
    chart = gibbs_chart(GibbsFamily((SIGMA_X,)))
    assert_allclose(family_tangent(chart, [0.0], 0).mixture_rep, SIGMA_X / 2, atol=1e-14)


def test_central_difference_on_quadratic_chart():
    family = ParametrizedFamily('quadratic', 1, lambda t: np.diag([1 + t[0] ** 2, 1.0]))
    assert_allclose(chart_derivative(family, [0.3], 0), np.diag([0.6, 0.0]), atol=1e-8)


def test_chart_outside_the_domain():
    with pytest.raises(ChartError):
        family_point(bloch_family(), [1.2, 0.0, 0.0])
    with pytest.raises(PositivityError):
        weight_matrix(np.diag([1.0, -0.1]))


def test_affine_coordinates_examples():
    assert_allclose(affine_coordinates(HALF, 0.0, pauli_basis()), [np.sqrt(2), 0, 0, 0], atol=1e-14)
    assert_allclose(affine_coordinates(np.diag([1.0, 4.0]), 0.0, pauli_basis()), [3, 0, 0, -1], atol=1e-14)


@given(integers(min_value=0, max_value=2 ** 32 - 1), sampled_from([-0.5, 0.0, 0.5]))
def test_affine_coordinates_round_trip(seed, alpha):
    rng = np.random.default_rng(seed)
    sigma = random_weight(3, rng)
    basis = hermitian_basis(3)
    xi = affine_coordinates(sigma, alpha, basis)
    assert_allclose(affine_point(xi, alpha, basis).matrix, sigma, atol=1e-9)
    assert_allclose(affine_coordinates(affine_point(xi, alpha, basis), alpha, basis), xi, atol=1e-9)


def test_affine_point_outside_the_image():
    with pytest.raises(PositivityError):
        affine_point([0.0, 0.0, 0.0, 1.0], 0.0, pauli_basis())


@pytest.mark.parametrize('alpha', [-0.5, 0.0, 0.3, 0.9, 1.0])
def test_mixture_representation_converts_to_every_alpha(alpha, rng):
    v = TangentVector(state_matrix(random_state(3, rng)), random_tangent(3, rng))
    converted = representation_convert(v.base, alpha_representation(v, -1.0), -1.0, alpha)
    assert_allclose(converted, alpha_representation(v, alpha), atol=1e-10)


def test_state_needs_unit_trace():
    with pytest.raises(TraceError) as info:
        state_matrix(np.eye(2))
    assert info.value.trace == pytest.approx(2.0)
    with pytest.raises(ChartError):
        family_point(ParametrizedFamily('unnormalized', 1, lambda t: np.diag([t[0], 0.5]), on_states=True), [1.0])
