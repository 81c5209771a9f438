"""Equations of motion, integrators and conservation monitors."""
import dataclasses
import logging

import numpy as np
import pytest

from gyrosym.core import so3
from gyrosym.core.dynamics import (
    REDUCED_EULER_POISSON,
    RK4_PROJECTED,
    GyroSystem,
    InertiaTensor,
    IntegratorConfig,
    area_integral,
    convergence_order,
    drift_summary,
    energy,
    equations_rhs,
    gyrostat_area_integral,
    integrate,
    kinetic_energy,
    lemma1_residual,
    reduced_consistency,
    trajectory_frame,
)
from gyrosym.core.fields import RotationScalarField, SphereScalarField
from gyrosym.core.forms import InvariantTwoForm
from gyrosym.core.symmetry import random_polynomial_kappa
from gyrosym.exceptions import NonInvariantData, StepRejected, ValidationError, WindowTooShort


def make_system(moments, potential="0", kappa=(0.0, 0.0, 0.0), **kwargs):
    if isinstance(kappa, InvariantTwoForm):
        form = kappa
    elif all(isinstance(k, (int, float)) for k in kappa):
        form = InvariantTwoForm.constant(kappa)
    else:
        form = InvariantTwoForm.from_expressions(kappa)
    return GyroSystem(
        inertia=InertiaTensor(*moments),
        potential=SphereScalarField.from_expression(potential),
        kappa=form,
        **kwargs,
    )


def attitude_kappa():
    """Closed kappa whose first coefficient reads the second row of Q."""
    zero = SphereScalarField.constant(0.0)
    return InvariantTwoForm((RotationScalarField(value=lambda Q: Q[1, 0], name="Q21"), zero, zero))


def test_rhs_spherical_free_body(rng):
    system = make_system((1.0, 1.0, 1.0))
    state = so3.BodyState(so3.random_rotation(rng), rng.standard_normal(3))
    omega_dot, _ = equations_rhs(system, state)
    np.testing.assert_allclose(omega_dot, 0.0, atol=1e-15)


def test_rhs_asymmetric_free_body():
    system = make_system((1.0, 2.0, 3.0))
    omega_dot, Q_dot = equations_rhs(system, so3.BodyState(np.eye(3), [1.0, 1.0, 1.0]))
    np.testing.assert_allclose(omega_dot, [-1.0, 1.0, -1.0 / 3.0], atol=1e-15)
    np.testing.assert_allclose(Q_dot, so3.hat([1.0, 1.0, 1.0]), atol=1e-15)


def test_rhs_gyrostat():
    c = 2.0
    system = make_system((1.0, 1.0, 1.0), kappa=(0.0, 0.0, c))
    omega_dot, _ = equations_rhs(system, so3.BodyState(np.eye(3), [0.3, -0.7, 0.0]))
    np.testing.assert_allclose(omega_dot, [c * 0.7, c * 0.3, 0.0], atol=1e-15)


def test_rhs_torque_from_potential():
    # heavy body with alpha = e1 and Pi = a3: torque alpha x grad Pi = e1 x e3 = -e2
    system = make_system((1.0, 2.0, 3.0), potential="a3")
    omega_dot, _ = equations_rhs(system, so3.BodyState(np.eye(3), np.zeros(3)))
    np.testing.assert_allclose(omega_dot, [0.0, -0.5, 0.0], atol=1e-15)


def test_gyrostat_trajectory_is_a_circle():
    c, w0 = 2.0, np.array([1.0, 0.5, 0.0])
    system = make_system((1.0, 1.0, 1.0), kappa=(0.0, 0.0, c))
    points = integrate(system, so3.BodyState(np.eye(3), w0), IntegratorConfig(dt=1e-3, t_end=3.0, stride=100))
    for p in points:
        angle = c * p.t
        expected = [w0[0] * np.cos(angle) - w0[1] * np.sin(angle), w0[0] * np.sin(angle) + w0[1] * np.cos(angle), 0.0]
        np.testing.assert_allclose(p.omega, expected, atol=1e-9)


def test_attitude_rows_follow_poisson_equations(rng):
    system = make_system((1.0, 2.0, 3.0), potential="a3")
    state = so3.BodyState(so3.random_rotation(rng), rng.standard_normal(3))
    _, Q_dot = equations_rhs(system, state)
    np.testing.assert_allclose(Q_dot, np.cross(state.Q, state.omega), atol=1e-12)


def test_energy_values():
    system = make_system((1.0, 2.0, 3.0))
    assert energy(system, so3.BodyState(np.eye(3), np.zeros(3))) == 0.0
    assert energy(system, so3.BodyState(np.eye(3), [1.0, 1.0, 1.0])) == pytest.approx(3.0)
    heavy = make_system((1.0, 2.0, 3.0), potential="a1")
    assert energy(heavy, so3.BodyState(np.eye(3), [1.0, 1.0, 1.0])) == pytest.approx(4.0)


def test_area_integral_values(rng):
    system = make_system((1.0, 2.0, 3.0), kappa=(0.3, -0.2, 0.5))
    state = so3.BodyState(so3.random_rotation(rng), np.zeros(3))
    assert area_integral(system, state) == 0.0

    state = so3.BodyState(so3.random_rotation(rng), rng.standard_normal(3))
    f = SphereScalarField.from_expression("0.3*a1 - 0.2*a2 + 0.5*a3")
    expected = area_integral(system, state, f)
    assert gyrostat_area_integral(system, state.omega, state.alpha) == pytest.approx(expected, abs=1e-14)


def test_gyrostat_integral_needs_constant_kappa():
    system = make_system((1.0, 2.0, 3.0), kappa=("a1", "a2", "a3"))
    with pytest.raises(ValidationError):
        gyrostat_area_integral(system, np.ones(3), np.array([1.0, 0.0, 0.0]))


def test_principal_axis_spin_is_an_equilibrium():
    system = make_system((1.0, 2.0, 3.0))
    points = integrate(system, so3.BodyState(np.eye(3), [1.0, 0.0, 0.0]), IntegratorConfig(dt=1e-2, t_end=10.0))
    for p in points:
        np.testing.assert_allclose(p.omega, [1.0, 0.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("method", [RK4_PROJECTED, REDUCED_EULER_POISSON])
def test_free_body_conserves_energy_and_momentum(method):
    system = make_system((1.0, 2.0, 3.0))
    initial = so3.BodyState(so3.complete_rotation([0.0, 0.6, 0.8]), [0.3, 1.0, -0.5])
    points = integrate(system, initial, IntegratorConfig(dt=1e-3, t_end=10.0, stride=50, method=method))
    moments = system.inertia.moments
    norms = [np.linalg.norm(moments * p.omega) for p in points]
    assert drift_summary(points)["energy_drift"] < 1e-9
    assert max(norms) - min(norms) < 1e-9
    momentum = [np.dot(moments * p.omega, p.alpha) for p in points]
    assert max(momentum) - min(momentum) < 1e-9


def test_gyroscopic_forces_do_no_work(rng):
    kappa = random_polynomial_kappa(rng, degree=2).form()
    system = make_system((1.0, 2.0, 3.0), kappa=kappa)
    initial = so3.BodyState(so3.random_rotation(rng), [0.4, -0.3, 0.2])
    points = integrate(system, initial, IntegratorConfig(dt=1e-3, t_end=5.0, stride=100))
    kinetic = [0.5 * np.dot(system.inertia.moments * p.omega, p.omega) for p in points]
    assert max(kinetic) - min(kinetic) < 1e-9
    assert kinetic_energy(system, initial) == pytest.approx(kinetic[0])


def test_full_method_keeps_orthonormality():
    system = make_system((1.0, 2.0, 3.0), potential="a3")
    initial = so3.BodyState(so3.complete_rotation([0.6, 0.0, 0.8]), [0.5, -1.0, 2.0])
    points = integrate(system, initial, IntegratorConfig(dt=1e-2, t_end=20.0, stride=10, method=RK4_PROJECTED))
    assert max(p.orth_err for p in points) <= 1e-10
    for p in points:
        np.testing.assert_array_equal(p.alpha, p.attitude[0])
        assert abs(np.linalg.norm(p.alpha) - 1.0) <= 1e-12


def test_rk4_global_order():
    system = make_system((1.0, 2.0, 3.0), potential="a3")
    initial = so3.BodyState(so3.complete_rotation([0.0, 0.6, 0.8]), [0.3, 1.0, -0.5])
    t_end = 2.0

    def final_omega(dt):
        cfg = IntegratorConfig(dt=dt, t_end=t_end, stride=int(round(t_end / dt)), method=RK4_PROJECTED)
        return integrate(system, initial, cfg)[-1].omega

    reference = final_omega(0.000625)
    steps = [0.02, 0.01, 0.005]
    errors = [np.max(np.abs(final_omega(dt) - reference)) for dt in steps]
    assert convergence_order(errors, steps) >= 3.8


@pytest.mark.slow
def test_lagrange_top_long_run():
    system = make_system((1.0, 1.0, 2.0), potential="a3")
    initial = so3.BodyState(so3.complete_rotation([0.0, 0.6, 0.8]), [0.4, -0.2, 1.5])
    f = SphereScalarField.constant(0.0)
    points = integrate(system, initial, IntegratorConfig(dt=1e-3, t_end=100.0, stride=100), f=f)
    summary = drift_summary(points)
    assert summary["energy_drift"] < 1e-8
    assert summary["area_drift"] < 1e-8


@pytest.mark.slow
@pytest.mark.parametrize("method", [RK4_PROJECTED, REDUCED_EULER_POISSON])
def test_lagrange_top_energy_error_is_fourth_order(method):
    system = make_system((1.0, 1.0, 2.0), potential="a3")
    initial = so3.BodyState(so3.complete_rotation([0.0, 0.6, 0.8]), [0.4, -0.2, 1.5])
    steps = [1e-2, 5e-3, 2.5e-3]
    drifts = []
    for dt in steps:
        cfg = IntegratorConfig(dt=dt, t_end=100.0, stride=int(round(1.0 / dt)), method=method)
        H = np.array([p.energy for p in integrate(system, initial, cfg)])
        drifts.append(np.max(np.abs(H - H[0])))
    assert drifts[0] > drifts[1] > drifts[2]
    assert convergence_order(drifts, steps) >= 3.8


@pytest.mark.slow
def test_full_method_orthonormality_over_long_run():
    system = make_system((1.0, 1.0, 2.0), potential="a3")
    initial = so3.BodyState(so3.complete_rotation([0.0, 0.6, 0.8]), [0.4, -0.2, 1.5])
    cfg = IntegratorConfig(dt=1e-3, t_end=100.0, stride=100, method=RK4_PROJECTED)
    points = integrate(system, initial, cfg)
    assert len(points) == 1001
    assert max(p.orth_err for p in points) <= 1e-10
    assert all(p.attitude is not None for p in points)

@pytest.mark.slow
def test_gyrostat_long_run():
    system = make_system((1.5, 2.0, 2.5), potential="a3", kappa=(0.0, 0.0, 0.5))
    initial = so3.BodyState(so3.complete_rotation([0.6, 0.0, 0.8]), [0.5, -0.3, 0.8])
    f = SphereScalarField.from_expression("0.5*a3")
    points = integrate(system, initial, IntegratorConfig(dt=1e-3, t_end=100.0, stride=100), f=f)
    summary = drift_summary(points)
    assert summary["energy_drift"] < 1e-8
    assert summary["area_drift"] < 1e-8


def test_reduced_and_full_methods_agree():
    system = make_system((1.0, 1.0, 2.0), potential="a3")
    initial = so3.BodyState(so3.complete_rotation([0.0, 0.6, 0.8]), [0.4, -0.2, 1.5])
    assert reduced_consistency(system, initial, IntegratorConfig(dt=1e-3, t_end=10.0, stride=100)) < 1e-6


def test_lemma1_residual_vanishes_without_kappa():
    system = make_system((1.0, 2.0, 3.0), potential="a3")
    initial = so3.BodyState(so3.complete_rotation([0.0, 0.6, 0.8]), [0.3, 1.0, -0.5])
    points = integrate(system, initial, IntegratorConfig(dt=1e-3, t_end=5.0, stride=10))
    assert lemma1_residual(system, points) < 1e-9


def test_lemma1_residual_converges_quadratically():
    system = make_system((1.0, 2.0, 3.0), kappa=("-a2", "a1", "0"), allow_open_kappa=True)
    initial = so3.BodyState(so3.complete_rotation([0.0, 0.6, 0.8]), [0.5, 0.2, -0.4])
    points = integrate(system, initial, IntegratorConfig(dt=1e-3, t_end=5.0, stride=10))
    residuals = [lemma1_residual(system, points[::sub]) for sub in (4, 2, 1)]
    strides = [0.04, 0.02, 0.01]
    assert residuals[0] > residuals[1] > residuals[2]
    assert convergence_order(residuals, strides) >= 1.9

@pytest.mark.parametrize("seed", [1, 2, 3])
def test_lemma1_residual_order_for_random_kappa(seed):
    kappa = random_polynomial_kappa(np.random.default_rng(seed), degree=3).form()
    system = make_system((1.0, 2.0, 3.0), potential="a3", kappa=kappa)
    initial = so3.BodyState(so3.complete_rotation([0.0, 0.6, 0.8]), [0.5, 0.2, -0.4])
    points = integrate(system, initial, IntegratorConfig(dt=1e-3, t_end=5.0, stride=10))
    residuals = [lemma1_residual(system, points[::sub]) for sub in (4, 2, 1)]
    assert residuals[0] > residuals[1] > residuals[2]
    assert convergence_order(residuals, [0.04, 0.02, 0.01]) >= 1.9


def test_system_is_immutable():
    system = make_system((1.0, 2.0, 3.0), potential="a3")
    with pytest.raises(dataclasses.FrozenInstanceError):
        system.label = "renamed"
    with pytest.raises(dataclasses.FrozenInstanceError):
        system.kappa = InvariantTwoForm.constant((0.0, 0.0, 1.0))
    assert system.psi_invariant
    assert system.closedness == pytest.approx(0.0, abs=1e-12)


def test_attitude_kappa_is_not_psi_invariant():
    system = make_system((1.0, 2.0, 3.0), kappa=attitude_kappa())
    assert not system.psi_invariant
    assert IntegratorConfig(dt=1e-2, t_end=1.0).resolve_method(system) == RK4_PROJECTED


def test_lemma1_window_too_short():
    system = make_system((1.0, 2.0, 3.0))
    points = integrate(system, so3.BodyState(np.eye(3), [1.0, 0.0, 0.0]), IntegratorConfig(dt=0.1, t_end=0.1))
    assert len(points) == 2
    with pytest.raises(WindowTooShort):
        lemma1_residual(system, points)


def test_non_closed_kappa_is_rejected():
    with pytest.raises(ValidationError) as info:
        make_system((1.0, 2.0, 3.0), kappa=("a2", "0", "0"))
    assert info.value.invariant == "closedness"
    assert info.value.detail["residual"] > 0.5
    assert len(info.value.detail["worst_point"]) == 3


def test_open_kappa_accepted_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        system = make_system((1.0, 2.0, 3.0), kappa=("-a2", "a1", "0"), allow_open_kappa=True, label="rot")
    assert not system.closed
    assert "not closed" in caplog.text


def test_inertia_validation(caplog):
    with pytest.raises(ValidationError):
        InertiaTensor(1.0, -2.0, 3.0)
    with pytest.raises(ValidationError):
        InertiaTensor.from_sequence([1.0, 2.0])
    with caplog.at_level(logging.WARNING):
        InertiaTensor(1.0, 1.0, 3.0)
    assert "triangle inequality" in caplog.text


def test_potential_must_depend_on_alpha_only():
    with pytest.raises(ValidationError):
        GyroSystem(inertia=InertiaTensor(1.0, 2.0, 3.0), potential=RotationScalarField(value=lambda Q: Q[1, 1]))


def test_integrator_config_validation():
    with pytest.raises(ValidationError):
        IntegratorConfig(dt=0.0)
    with pytest.raises(ValidationError):
        IntegratorConfig(stride=0)
    with pytest.raises(ValidationError):
        IntegratorConfig(method="euler")
    assert IntegratorConfig(dt=1e-3, t_end=2.0).steps == 2000


def test_attitude_dependent_kappa(rng):
    system = make_system((1.0, 2.0, 3.0), kappa=attitude_kappa())
    assert system.closed and not system.psi_invariant
    initial = so3.BodyState(so3.random_rotation(rng), [0.1, 0.2, 0.3])
    with pytest.raises(NonInvariantData):
        system.kappa_vector(initial.alpha)
    with pytest.raises(NonInvariantData):
        integrate(system, initial, IntegratorConfig(dt=1e-2, t_end=0.1, method=REDUCED_EULER_POISSON))

    cfg = IntegratorConfig(dt=1e-2, t_end=0.1)
    assert cfg.resolve_method(system) == RK4_PROJECTED
    points = integrate(system, initial, cfg)
    assert len(points) == 11
    assert points[-1].state.Q.shape == (3, 3)


def test_step_rejected_when_orthonormality_cannot_be_met():
    system = make_system((1.0, 2.0, 3.0))
    initial = so3.BodyState(so3.complete_rotation([0.0, 0.6, 0.8]), [0.3, 1.0, -0.5])
    cfg = IntegratorConfig(dt=1e-2, t_end=1.0, method=RK4_PROJECTED, tau_orth=1e-300)
    with pytest.raises(StepRejected):
        integrate(system, initial, cfg)


def test_reduced_points_carry_no_attitude():
    system = make_system((1.0, 2.0, 3.0))
    points = integrate(system, so3.BodyState(np.eye(3), [0.0, 1.0, 0.0]), IntegratorConfig(dt=0.1, t_end=0.2))
    with pytest.raises(NonInvariantData):
        points[0].state


def test_trajectory_frame_columns():
    system = make_system((1.0, 2.0, 3.0))
    initial = so3.BodyState(np.eye(3), [0.0, 1.0, 0.0])
    cfg = IntegratorConfig(dt=0.1, t_end=0.5)
    frame = trajectory_frame(integrate(system, initial, cfg))
    assert list(frame.columns) == ["t", "w1", "w2", "w3", "a1", "a2", "a3", "H", "orth_err"]
    frame = trajectory_frame(integrate(system, initial, cfg, f=SphereScalarField.constant(0.0)))
    assert list(frame.columns) == ["t", "w1", "w2", "w3", "a1", "a2", "a3", "H", "G", "orth_err"]
    assert len(frame) == 6


def test_convergence_order():
    steps = np.array([0.1, 0.05, 0.025])
    assert convergence_order(3.0 * steps**2, steps) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        convergence_order([1.0], [0.1])
