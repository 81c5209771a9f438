"""
Equations of motion of a rigid body with gyroscopic forces.

The system is (SO(3), A, Pi, kappa): diagonal inertia A, potential Pi(alpha)
and gyroscopic 2-form kappa with coefficient vector k. In body components the
Euler equations read

    A dw/dt = (A w) x w + k x w + alpha x grad Pi(alpha)

and the attitude follows dQ/dt = Q hat(w), i.e. every row r of Q obeys
dr/dt = r x w. Two fixed-step RK4 integrators are provided: the full one on
(w, Q) with projection back to SO(3), and the reduced one on (w, alpha) on the
Poisson sphere for systems invariant under rotations about the first space axis.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import sympy
from tqdm import tqdm

from gyrosym import config
from gyrosym.core import so3
from gyrosym.core.fields import SYMBOLS, SphereScalarField, stack_values
from gyrosym.core.forms import InvariantTwoForm, max_closedness_residual
from gyrosym.exceptions import (
    Degenerate,
    NonInvariantData,
    StepRejected,
    ValidationError,
    WindowTooShort,
)

logger = logging.getLogger(__name__)

RK4_PROJECTED = "rk4-projected"
REDUCED_EULER_POISSON = "reduced-euler-poisson"
METHODS = (RK4_PROJECTED, REDUCED_EULER_POISSON)

# Points used to certify closedness of kappa when a system is built
CLOSEDNESS_POINTS = 200
CLOSEDNESS_ROTATIONS = 50


@dataclass(frozen=True)
class InertiaTensor:
    """Principal moments of inertia A1, A2, A3."""

    A1: float
    A2: float
    A3: float

    def __post_init__(self):
        moments = (self.A1, self.A2, self.A3)
        if not all(np.isfinite(m) and m > 0 for m in moments):
            raise ValidationError("inertia", f"moments must be positive, got {moments}")
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            if moments[j] + moments[k] < moments[i]:
                logger.warning(
                    "inertia %s violates the triangle inequality A%d + A%d >= A%d",
                    moments, j + 1, k + 1, i + 1,
                )

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "InertiaTensor":
        if len(values) != 3:
            raise ValidationError("inertia", f"expected three moments, got {len(values)}")
        return cls(*(float(v) for v in values))

    @property
    def moments(self) -> np.ndarray:
        return np.array([self.A1, self.A2, self.A3])


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # single 3-vectors only; used in the integrators' inner loop
    return np.array([
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ])


def _compile_exprs(exprs: Sequence[Optional[sympy.Expr]]) -> Optional[Callable[[np.ndarray], np.ndarray]]:
    """Evaluator alpha (3,) -> (3,) for expressions in a1, a2, a3; None if any is missing."""
    if all(e is not None for e in exprs):
        if not any(e.free_symbols for e in exprs):
            const = np.array([float(e) for e in exprs])
            return lambda a: const
        fn = sympy.lambdify(SYMBOLS, exprs, "numpy")
        return lambda a: np.array(fn(a[0], a[1], a[2]), dtype=float)
    return None


def _compile_vector(fields: Sequence[SphereScalarField]) -> Callable[[np.ndarray], np.ndarray]:
    compiled = _compile_exprs([f.expr for f in fields])
    return compiled if compiled is not None else (lambda a: stack_values(fields, a))


def _compile_gradient(potential: SphereScalarField) -> Callable[[np.ndarray], np.ndarray]:
    if potential.expr is not None:
        return _compile_exprs([sympy.diff(potential.expr, s) for s in SYMBOLS])
    return potential.grad


@dataclass(frozen=True)
class GyroSystem:
    """
    Mechanical system with gyroscopic forces.

    Args:
        inertia: Principal moments
        potential: Pi as a function of alpha
        kappa: Gyroscopic 2-form; must be closed unless allow_open_kappa is set
        label: Name used in logs and reports
        allow_open_kappa: Accept a kappa that fails the closedness test (logged)
        tau_closed: Closedness tolerance
    """

    inertia: InertiaTensor
    potential: SphereScalarField = field(default_factory=lambda: SphereScalarField.constant(0.0, name="0"))
    kappa: InvariantTwoForm = field(default_factory=lambda: InvariantTwoForm.constant((0.0, 0.0, 0.0)))
    label: str = ""
    allow_open_kappa: bool = False
    tau_closed: float = config.TAU_CLOSED
    closedness: float = field(init=False, default=0.0)

    def __post_init__(self):
        if not isinstance(self.potential, SphereScalarField):
            raise ValidationError(
                "potential", "the potential must be a function of alpha only (out of schema)"
            )
        closedness, worst = max_closedness_residual(self.kappa, CLOSEDNESS_POINTS, CLOSEDNESS_ROTATIONS)
        object.__setattr__(self, "closedness", closedness)
        if closedness > self.tau_closed:
            detail = {"residual": closedness, "worst_point": [float(x) for x in worst]}
            if not self.allow_open_kappa:
                raise ValidationError(
                    "closedness",
                    f"kappa is not closed: residual {closedness:.3e} at {np.round(worst, 6).tolist()}",
                    detail,
                )
            logger.warning(
                "system %r: kappa is not closed (residual %.3e), accepted because allow_open_kappa is set",
                self.label, closedness,
            )
        object.__setattr__(self, "_moments", self.inertia.moments)
        object.__setattr__(self, "_grad_potential", _compile_gradient(self.potential))
        kappa_vector = _compile_vector(self.kappa.k) if self.kappa.alpha_only else None
        object.__setattr__(self, "_kappa_vector", kappa_vector)

    @property
    def psi_invariant(self) -> bool:
        """True when kappa depends on alpha only; Pi always does."""
        return self.kappa.alpha_only

    @property
    def closed(self) -> bool:
        return self.closedness <= self.tau_closed

    def kappa_vector(self, alpha: np.ndarray, Q: Optional[np.ndarray] = None) -> np.ndarray:
        """Coefficient vector k at alpha (or at the attitude Q for attitude-dependent kappa)."""
        if self._kappa_vector is not None:
            return self._kappa_vector(np.asarray(alpha, dtype=float))
        if Q is None:
            raise NonInvariantData(f"kappa of system {self.label!r} depends on the full attitude")
        return self.kappa.coefficients_at(Q)

    def omega_dot(self, omega: np.ndarray, alpha: np.ndarray, k: np.ndarray) -> np.ndarray:
        A = self._moments
        torque = _cross(A * omega + k, omega) + _cross(alpha, self._grad_potential(alpha))
        return torque / A


def equations_rhs(system: GyroSystem, state: so3.BodyState) -> Tuple[np.ndarray, np.ndarray]:
    """
    Right-hand side of the Euler and Poisson equations.

    Returns:
        (omega_dot, Q_dot) with Q_dot = Q hat(omega)
    """
    Q, omega = state.as_tuple()
    alpha = Q[0]
    k = system.kappa_vector(alpha, Q)
    return system.omega_dot(omega, alpha, k), Q @ so3.hat(omega)


def kinetic_energy(system: GyroSystem, state: so3.BodyState) -> float:
    omega = state.omega
    return 0.5 * float(np.dot(system.inertia.moments * omega, omega))


def energy(system: GyroSystem, state: so3.BodyState) -> float:
    """H = 1/2 A w . w + Pi(alpha)."""
    return kinetic_energy(system, state) + float(system.potential(state.alpha))


def area_integrand(system: GyroSystem, omega: np.ndarray, alpha: np.ndarray) -> float:
    """The momentum function A w . alpha."""
    return float(np.dot(system.inertia.moments * np.asarray(omega), np.asarray(alpha)))


def area_integral(system: GyroSystem, state: so3.BodyState, f: Optional[SphereScalarField] = None) -> float:
    """G = A1 w1 a1 + A2 w2 a2 + A3 w3 a3 + f(alpha)."""
    value = area_integrand(system, state.omega, state.alpha)
    if f is not None:
        value += float(f(state.alpha))
    return value


def gyrostat_area_integral(system: GyroSystem, omega: np.ndarray, alpha: np.ndarray) -> float:
    """G = sum_i (A_i w_i + k_i) a_i for a constant gyroscopic vector k."""
    if not system.kappa.is_constant:
        raise ValidationError("gyrostat", "the gyrostat integral needs constant kappa coefficients")
    k = system.kappa_vector(alpha)
    return float(np.dot(system.inertia.moments * np.asarray(omega) + k, np.asarray(alpha)))


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Fixed-step integration settings.

    Args:
        dt: Step size
        t_end: Final time
        stride: Number of steps between recorded points
        method: rk4-projected or reduced-euler-poisson; None picks the reduced
            method for invariant systems
        tau_orth: Tolerance for restoring orthonormality / |alpha| = 1
    """

    dt: float = 1e-3
    t_end: float = 10.0
    stride: int = 1
    method: Optional[str] = None
    tau_orth: float = config.TAU_ORTH

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("integrator", f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValidationError("integrator", f"t_end must be non-negative, got {self.t_end}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValidationError("integrator", f"stride must be a positive integer, got {self.stride}")
        if self.method is not None and self.method not in METHODS:
            raise ValidationError("integrator", f"unknown method {self.method!r}; expected one of {METHODS}")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def resolve_method(self, system: GyroSystem) -> str:
        if self.method is not None:
            return self.method
        return REDUCED_EULER_POISSON if system.psi_invariant else RK4_PROJECTED


@dataclass(frozen=True)
class TrajectoryPoint:
    """
    One recorded sample.

    attitude is present for the full method only; orth_err is max|QQ^T - I|
    there and ||alpha| - 1| for the reduced method.
    """

    t: float
    omega: np.ndarray
    alpha: np.ndarray
    energy: float
    orth_err: float
    area: Optional[float] = None
    attitude: Optional[np.ndarray] = None

    @property
    def state(self) -> so3.BodyState:
        if self.attitude is None:
            raise NonInvariantData("reduced trajectories carry alpha only, not the full attitude")
        return so3.BodyState(self.attitude, self.omega)


def _record(system, t, omega, alpha, orth_err, f, attitude=None) -> TrajectoryPoint:
    A = system.inertia.moments
    H = 0.5 * float(np.dot(A * omega, omega)) + float(system.potential(alpha))
    area = None
    if f is not None:
        area = float(np.dot(A * omega, alpha)) + float(f(alpha))
    return TrajectoryPoint(
        t=t, omega=omega.copy(), alpha=alpha.copy(), energy=H, orth_err=orth_err,
        area=area, attitude=None if attitude is None else attitude.copy(),
    )


def _restore_attitude(Q: np.ndarray, tol: float, t: float) -> np.ndarray:
    try:
        Q = so3.project_to_so3(Q)
    except Degenerate as exc:
        raise StepRejected(f"attitude degenerated at t={t:.6g}: {exc}") from exc
    err = so3.orthonormality_error(Q)
    if err > tol:
        raise StepRejected(f"orthonormality error {err:.3e} exceeds {tol:.1e} at t={t:.6g}")
    return Q


def _restore_alpha(alpha: np.ndarray, tol: float, t: float) -> np.ndarray:
    norm = np.linalg.norm(alpha)
    if not np.isfinite(norm) or norm == 0.0:
        raise StepRejected(f"alpha degenerated at t={t:.6g}")
    alpha = alpha / norm
    if abs(np.linalg.norm(alpha) - 1.0) > tol:
        raise StepRejected(f"|alpha| could not be restored at t={t:.6g}")
    return alpha


def integrate(
    system: GyroSystem,
    initial: so3.BodyState,
    cfg: IntegratorConfig,
    f: Optional[SphereScalarField] = None,
    progress: bool = False,
) -> List[TrajectoryPoint]:
    """
    Integrate the equations of motion with classical RK4.

    Args:
        system: System to integrate
        initial: Initial attitude and angular velocity
        cfg: Step size, horizon, output stride and method
        f: Potential of kappa; when given, each point carries G = A w . alpha + f(alpha)
        progress: Show a tqdm progress bar on stderr

    Returns:
        Points at t = 0, stride*dt, 2*stride*dt, ...

    Raises:
        NonInvariantData: reduced method requested for attitude-dependent data
        StepRejected: orthonormality or |alpha| = 1 could not be restored
    """
    method = cfg.resolve_method(system)
    if method == REDUCED_EULER_POISSON and not system.psi_invariant:
        raise NonInvariantData(
            f"system {system.label!r} depends on the full attitude; use {RK4_PROJECTED}"
        )
    dt, n, stride = cfg.dt, cfg.steps, int(cfg.stride)
    logger.info("integrating %r: method=%s dt=%g steps=%d", system.label, method, dt, n)

    omega = initial.omega.copy()
    Q = initial.Q.copy()
    alpha = Q[0].copy()
    if method == REDUCED_EULER_POISSON:
        points = [_record(system, 0.0, omega, alpha, abs(np.linalg.norm(alpha) - 1.0), f)]
    else:
        points = [_record(system, 0.0, omega, alpha, so3.orthonormality_error(Q), f, Q)]

    bar = tqdm(range(1, n + 1), disable=not progress, desc=system.label or "integrate", unit="step")
    if method == REDUCED_EULER_POISSON:
        kvec = system.kappa_vector

        def rhs(w, a):
            return system.omega_dot(w, a, kvec(a)), _cross(a, w)

        for i in bar:
            k1w, k1a = rhs(omega, alpha)
            k2w, k2a = rhs(omega + 0.5 * dt * k1w, alpha + 0.5 * dt * k1a)
            k3w, k3a = rhs(omega + 0.5 * dt * k2w, alpha + 0.5 * dt * k2a)
            k4w, k4a = rhs(omega + dt * k3w, alpha + dt * k3a)
            omega = omega + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
            alpha = alpha + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            if not np.all(np.isfinite(omega)):
                raise StepRejected(f"angular velocity diverged at t={i * dt:.6g}")
            drift = abs(np.linalg.norm(alpha) - 1.0)
            alpha = _restore_alpha(alpha, cfg.tau_orth, i * dt)
            if i % stride == 0:
                points.append(_record(system, i * dt, omega, alpha, drift, f))
    else:

        def rhs(w, R):
            return system.omega_dot(w, R[0], system.kappa_vector(R[0], R)), R @ so3.hat(w)

        for i in bar:
            k1w, k1q = rhs(omega, Q)
            k2w, k2q = rhs(omega + 0.5 * dt * k1w, Q + 0.5 * dt * k1q)
            k3w, k3q = rhs(omega + 0.5 * dt * k2w, Q + 0.5 * dt * k2q)
            k4w, k4q = rhs(omega + dt * k3w, Q + dt * k3q)
            omega = omega + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
            Q = Q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
            if not np.all(np.isfinite(omega)):
                raise StepRejected(f"angular velocity diverged at t={i * dt:.6g}")
            Q = _restore_attitude(Q, cfg.tau_orth, i * dt)
            if i % stride == 0:
                points.append(_record(system, i * dt, omega, Q[0], so3.orthonormality_error(Q), f, Q))
    bar.close()
    return points


def _centred_rates(times: np.ndarray, values: np.ndarray, window: int) -> np.ndarray:
    return (values[2 * window:] - values[:-2 * window]) / (times[2 * window:] - times[:-2 * window])


def lemma1_residual(
    system: GyroSystem,
    trajectory: Sequence[TrajectoryPoint],
    window: int = 1,
) -> float:
    """
    Max |d/dt (A w . alpha) - (alpha x k) . w| along a trajectory.

    The derivative is a centred difference over +-window recorded points, so
    the residual shrinks as the square of the output spacing.

    Raises:
        WindowTooShort: fewer than 2 * window + 1 points
    """
    if window < 1 or len(trajectory) < 2 * window + 1:
        raise WindowTooShort(f"need at least {2 * window + 1} points, got {len(trajectory)}")
    times = np.array([p.t for p in trajectory])
    momentum = np.array([area_integrand(system, p.omega, p.alpha) for p in trajectory])
    rates = _centred_rates(times, momentum, window)
    inner = trajectory[window:len(trajectory) - window]
    analytic = np.array([
        np.dot(np.cross(p.alpha, system.kappa_vector(p.alpha, p.attitude)), p.omega) for p in inner
    ])
    return float(np.max(np.abs(rates - analytic)))


def area_rate_residual(
    system: GyroSystem,
    trajectory: Sequence[TrajectoryPoint],
    f: SphereScalarField,
    window: int = 1,
) -> float:
    """Max |dG/dt| for G = A w . alpha + f(alpha), by centred differences."""
    if window < 1 or len(trajectory) < 2 * window + 1:
        raise WindowTooShort(f"need at least {2 * window + 1} points, got {len(trajectory)}")
    times = np.array([p.t for p in trajectory])
    G = np.array([area_integrand(system, p.omega, p.alpha) + float(f(p.alpha)) for p in trajectory])
    return float(np.max(np.abs(_centred_rates(times, G, window))))


def reduced_consistency(system: GyroSystem, initial: so3.BodyState, cfg: IntegratorConfig) -> float:
    """Max |alpha_full(t) - alpha_reduced(t)| between the two integrators."""
    full = integrate(system, initial, _with_method(cfg, RK4_PROJECTED))
    reduced = integrate(system, initial, _with_method(cfg, REDUCED_EULER_POISSON))
    return float(max(np.max(np.abs(a.alpha - b.alpha)) for a, b in zip(full, reduced)))


def _with_method(cfg: IntegratorConfig, method: str) -> IntegratorConfig:
    return IntegratorConfig(dt=cfg.dt, t_end=cfg.t_end, stride=cfg.stride, method=method, tau_orth=cfg.tau_orth)


def trajectory_frame(points: Sequence[TrajectoryPoint]) -> pd.DataFrame:
    """Tabulate a trajectory; the G column is present only when every point carries it."""
    data = {
        "t": [p.t for p in points],
        "w1": [p.omega[0] for p in points],
        "w2": [p.omega[1] for p in points],
        "w3": [p.omega[2] for p in points],
        "a1": [p.alpha[0] for p in points],
        "a2": [p.alpha[1] for p in points],
        "a3": [p.alpha[2] for p in points],
        "H": [p.energy for p in points],
    }
    if points and all(p.area is not None for p in points):
        data["G"] = [p.area for p in points]
    data["orth_err"] = [p.orth_err for p in points]
    return pd.DataFrame(data)


def drift_summary(points: Sequence[TrajectoryPoint]) -> Dict[str, Optional[float]]:
    """
    Conservation diagnostics.

    Returns:
        energy_drift: max |H - H(0)| / |H(0)| (absolute when H(0) = 0)
        area_drift: max |G - G(0)| / max(1, |G(0)|), or None without G
        orth_err: max orthonormality error
    """
    H = np.array([p.energy for p in points])
    H0 = abs(H[0]) if H[0] != 0 else 1.0
    summary: Dict[str, Optional[float]] = {
        "energy_drift": float(np.max(np.abs(H - H[0])) / H0),
        "area_drift": None,
        "orth_err": float(max(p.orth_err for p in points)),
    }
    if all(p.area is not None for p in points):
        G = np.array([p.area for p in points])
        summary["area_drift"] = float(np.max(np.abs(G - G[0])) / max(1.0, abs(G[0])))
    return summary


def convergence_order(errors: Sequence[float], steps: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(step)."""
    errors = np.maximum(np.asarray(errors, dtype=float), np.finfo(float).tiny)
    steps = np.asarray(steps, dtype=float)
    if len(errors) < 2 or len(errors) != len(steps):
        raise ValueError("need at least two matching (error, step) pairs")
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    return float(slope)
