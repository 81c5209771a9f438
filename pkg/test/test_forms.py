"""Exterior calculus in the left-invariant coframe."""
import numpy as np
import pytest
import sympy

from gyrosym.core import so3
from gyrosym.core.fields import SYMBOLS, RotationScalarField, SphereScalarField
from gyrosym.core.forms import (
    InvariantOneForm,
    InvariantTwoForm,
    closedness_residual,
    closedness_residual_curl,
    closedness_residuals,
    evaluate_two_form,
    exterior_derivative_oneform,
    exterior_derivative_scalar,
    frame_derivative,
    interior_product,
    interior_symmetry,
    lie_derivative,
    max_closedness_residual,
    pair_one_form,
    pullback_rate,
)
from gyrosym.core.symmetry import random_polynomial_kappa
from gyrosym.exceptions import OffSphere


def random_polynomial(rng, degree=3):
    monomials = sorted(sympy.itermonomials(SYMBOLS, degree), key=sympy.default_sort_key)
    return sum(sympy.Rational(int(c), 100) * m for c, m in zip(rng.integers(-100, 101, len(monomials)), monomials))


def flow_derivative(F, Q, axis, h=1e-5):
    """Directional derivative of a sphere field along the flow of Omega_axis."""
    return (F.at(so3.flow(Q, axis, h)) - F.at(so3.flow(Q, axis, -h))) / (2 * h)


def test_frame_derivative_examples(sphere_points):
    F = SphereScalarField.coordinate(1)
    norm_sq = SphereScalarField.from_expression("a1^2 + a2^2 + a3^2")
    for alpha in sphere_points:
        assert frame_derivative(F, 1, alpha) == pytest.approx(0.0, abs=1e-15)
        assert frame_derivative(F, 3, alpha) == pytest.approx(alpha[1], abs=1e-15)
        for axis in (1, 2, 3):
            assert frame_derivative(norm_sq, axis, alpha) == pytest.approx(0.0, abs=1e-14)


def test_frame_derivative_rejects_bad_input():
    F = SphereScalarField.coordinate(1)
    with pytest.raises(OffSphere):
        frame_derivative(F, 1, np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        frame_derivative(F, 4, np.array([1.0, 0.0, 0.0]))


def test_exterior_derivative_scalar_matches_flows(rng):
    F = SphereScalarField.coordinate(3)
    dF = exterior_derivative_scalar(F)
    for Q in so3.random_rotations(rng, 20):
        expected = [flow_derivative(F, Q, axis) for axis in (1, 2, 3)]
        np.testing.assert_allclose(dF.coefficients_at(Q), expected, atol=1e-8)
        alpha = Q[0]
        np.testing.assert_allclose(dF.coefficients(alpha), [-alpha[1], alpha[0], 0.0], atol=1e-14)


def with_radial_gradient(F, scale):
    """Same values on the sphere, gradient shifted by scale * alpha."""
    return SphereScalarField(value=F.value, gradient=lambda a: F.grad(a) + scale * np.asarray(a, dtype=float))


def test_radial_gradient_part_drops_out(rng, sphere_points):
    F = SphereScalarField.from_sympy(random_polynomial(rng))
    shifted = with_radial_gradient(F, 3.7)
    for axis in (1, 2, 3):
        for a in sphere_points:
            assert frame_derivative(shifted, axis, a) == pytest.approx(frame_derivative(F, axis, a), abs=1e-10)
    np.testing.assert_allclose(
        exterior_derivative_scalar(shifted).coefficients(sphere_points),
        exterior_derivative_scalar(F).coefficients(sphere_points),
        atol=1e-10,
    )

    rotational = InvariantTwoForm.from_expressions(["-a2", "a1", "a1*a3"])
    shifted_kappa = InvariantTwoForm(tuple(with_radial_gradient(k, 2.5) for k in rotational.k))
    np.testing.assert_allclose(
        closedness_residuals(shifted_kappa, sphere_points), closedness_residuals(rotational, sphere_points), atol=1e-10
    )
    for a in sphere_points[:5]:
        assert closedness_residual(shifted_kappa, a) == pytest.approx(closedness_residual(rotational, a), abs=1e-10)


def test_exterior_derivative_of_constant_is_zero(sphere_points):
    dF = exterior_derivative_scalar(SphereScalarField.constant(2.5))
    np.testing.assert_array_equal(dF.coefficients(sphere_points), np.zeros((len(sphere_points), 3)))


def test_exterior_derivative_scalar_general_formula(rng, sphere_points):
    f = random_polynomial(rng)
    dF = exterior_derivative_scalar(SphereScalarField.from_sympy(f))
    grad = np.stack([sympy.lambdify(SYMBOLS, sympy.diff(f, s))(*sphere_points.T) * np.ones(len(sphere_points)) for s in SYMBOLS], axis=-1)
    a = sphere_points
    expected = np.stack([
        a[:, 1] * grad[:, 2] - a[:, 2] * grad[:, 1],
        a[:, 2] * grad[:, 0] - a[:, 0] * grad[:, 2],
        a[:, 0] * grad[:, 1] - a[:, 1] * grad[:, 0],
    ], axis=-1)
    np.testing.assert_allclose(dF.coefficients(a), -expected, atol=1e-12)


@pytest.mark.parametrize("axis", [1, 2, 3])
def test_structure_equations(axis, sphere_points):
    k = exterior_derivative_oneform(InvariantOneForm.basis(axis))
    expected = np.zeros((len(sphere_points), 3))
    expected[:, axis - 1] = 1.0
    np.testing.assert_array_equal(k.coefficients(sphere_points), expected)


def test_d_squared_vanishes(rng, sphere_points):
    for _ in range(10):
        F = SphereScalarField.from_sympy(random_polynomial(rng))
        ddF = exterior_derivative_oneform(exterior_derivative_scalar(F))
        assert np.max(np.abs(ddF.coefficients(sphere_points))) <= 1e-8


def test_d_squared_vanishes_for_attitude_fields(rng):
    F = RotationScalarField(value=lambda Q: Q[1, 2] + Q[0, 0] * Q[2, 1], name="mixed")
    ddF = exterior_derivative_oneform(exterior_derivative_scalar(F))
    for Q in so3.random_rotations(rng, 5):
        assert np.max(np.abs(ddF.coefficients_at(Q))) < 1e-4


def test_exterior_derivative_by_invariant_formula(rng):
    # d theta(X_a, X_b) = X_a theta(X_b) - X_b theta(X_a) - theta([X_a, X_b])
    theta = InvariantOneForm((SphereScalarField.coordinate(3), SphereScalarField.constant(0.0), SphereScalarField.constant(0.0)))
    dtheta = exterior_derivative_oneform(theta)
    c = theta.c[0]
    for Q in so3.random_rotations(rng, 10):
        for i, j in [(1, 2), (2, 3), (3, 1)]:
            e_i, e_j = np.eye(3)[i - 1], np.eye(3)[j - 1]
            brute = (
                flow_derivative(c, Q, i) * e_j[0]
                - flow_derivative(c, Q, j) * e_i[0]
                - c.at(Q) * np.cross(e_i, e_j)[0]
            )
            assert dtheta.evaluate(Q, e_i, e_j) == pytest.approx(brute, abs=1e-8)


def test_interior_product_cross_product(rng):
    kappa = InvariantTwoForm.constant((0.0, 0.0, 1.0))
    one_form = interior_product(kappa, np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(one_form.coefficients(np.array([0.0, 0.0, 1.0])), [0.0, -1.0, 0.0], atol=1e-15)

    kappa = InvariantTwoForm.from_expressions(["a1*a2", "a3", "1 + a1"])
    Q = so3.random_rotation(rng)
    a = rng.standard_normal(3)
    theta = interior_product(kappa, a)
    for j in range(3):
        e_j = np.eye(3)[j]
        assert pair_one_form(theta, Q, e_j) == pytest.approx(evaluate_two_form(kappa, Q, a, e_j), abs=1e-12)


def test_interior_symmetry_coefficients(sphere_points):
    kappa = InvariantTwoForm.from_expressions(["a2", "a1*a3", "2"])
    k = kappa.coefficients(sphere_points)
    np.testing.assert_allclose(
        interior_symmetry(kappa).coefficients(sphere_points), np.cross(sphere_points, k), atol=1e-14
    )


def test_two_form_is_antisymmetric(rng):
    kappa = InvariantTwoForm.from_expressions(["a1", "a2^2", "sin(a3)"])
    Q = so3.random_rotation(rng)
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    assert kappa.evaluate(Q, a, b) == pytest.approx(-kappa.evaluate(Q, b, a))
    assert kappa.evaluate(Q, a, a) == pytest.approx(0.0, abs=1e-14)


def test_closedness_examples(sphere_points):
    assert np.all(closedness_residuals(InvariantTwoForm.constant((1.0, -2.0, 0.5)), sphere_points) == 0.0)

    kappa = InvariantTwoForm.from_expressions(["a2", "0", "0"])
    for alpha in sphere_points:
        assert closedness_residual(kappa, alpha) == pytest.approx(alpha[2], abs=1e-14)
        assert closedness_residual(kappa, alpha) == pytest.approx(float(closedness_residual_curl(kappa, alpha)), abs=1e-14)

    rotational = InvariantTwoForm.from_expressions(["-a2", "a1", "0"])
    np.testing.assert_allclose(closedness_residuals(rotational, sphere_points), -2 * sphere_points[:, 2], atol=1e-14)

    with pytest.raises(OffSphere):
        closedness_residual(kappa, np.array([0.0, 0.0, 2.0]))


def test_gradient_plus_radial_is_closed(rng):
    for _ in range(5):
        kappa = random_polynomial_kappa(rng).form()
        residual, _ = max_closedness_residual(kappa)
        assert residual <= 1e-8


def test_closedness_curl_cross_check_fd(rng, sphere_points):
    # numerical gradients only
    poly = random_polynomial_kappa(rng, degree=2).form()
    fd = InvariantTwoForm.from_vector(lambda a: poly.coefficients(a))
    np.testing.assert_allclose(closedness_residual_curl(fd, sphere_points), 0.0, atol=1e-7)


def test_lie_derivative_vanishes_for_alpha_only(rng, sphere_points):
    kappa = InvariantTwoForm.from_expressions(["a1*a2", "a3^2", "a1 - a3"])
    L = lie_derivative(kappa)
    np.testing.assert_allclose(L.coefficients(sphere_points), 0.0, atol=1e-12)

    for axis in (1, 2, 3):
        L = lie_derivative(InvariantOneForm.basis(axis))
        np.testing.assert_allclose(L.coefficients(sphere_points), 0.0, atol=1e-12)


def test_lie_derivative_matches_pullback_rate(rng):
    # k_1 depends on the second row of the attitude, so the form is not invariant
    k1 = RotationScalarField(value=lambda Q: Q[1, 0], name="Q21")
    zero = SphereScalarField.constant(0.0)
    kappa = InvariantTwoForm((k1, zero, zero))
    L = lie_derivative(kappa)
    nonzero = False
    for Q in so3.random_rotations(rng, 5):
        rate = pullback_rate(kappa, Q)
        np.testing.assert_allclose(L.coefficients_at(Q), rate, atol=1e-4)
        nonzero |= np.max(np.abs(rate)) > 1e-3
    assert nonzero


def test_lie_derivative_rejects_other_types():
    with pytest.raises(TypeError):
        lie_derivative(SphereScalarField.constant(1.0))


def test_radial_gradient_kappa_is_invariant(rng):
    kappa = random_polynomial_kappa(rng, degree=2).form()
    for Q in so3.random_rotations(rng, 5):
        np.testing.assert_allclose(pullback_rate(kappa, Q), 0.0, atol=1e-9)
