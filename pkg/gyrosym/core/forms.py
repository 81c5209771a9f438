"""
Exterior calculus in the left-invariant coframe lambda_1, lambda_2, lambda_3.

A 1-form is theta = c_1 lambda_1 + c_2 lambda_2 + c_3 lambda_3.
A 2-form uses the basis fixed by the structure equations:

    kappa = k_1 lambda_3^lambda_2 + k_2 lambda_1^lambda_3 + k_3 lambda_2^lambda_1

so that d lambda_i is the i-th basis element, kappa(a, b) = k . (b x a) for
vectors with frame components a, b, and the interior product i_a kappa has
coefficient vector a x k. This is the convention under which the gyroscopic
terms of the Euler equations read (k x omega).

Coefficients are ScalarField objects. When every coefficient is an alpha-only
field the results are alpha-only fields (exact when the inputs carry sympy
expressions); otherwise they are attitude fields evaluated pointwise.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from gyrosym import config
from gyrosym.core import so3
from gyrosym.core.fields import (
    SYMBOLS,
    RotationScalarField,
    ScalarField,
    SphereScalarField,
    frame_jacobian,
    frame_jacobian_at,
    stack_values,
)
from gyrosym.exceptions import OffSphere

logger = logging.getLogger(__name__)

_ALPHA = sympy.Matrix(SYMBOLS)


def _check_sphere(alpha: np.ndarray, tol: float = config.TAU_SPHERE) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    deviation = np.max(np.abs(np.linalg.norm(alpha, axis=-1) - 1.0))
    if deviation > tol:
        raise OffSphere(f"point is off the unit sphere by {deviation:.3e}")
    return alpha


def _sym_grad(expr: sympy.Expr) -> sympy.Matrix:
    return sympy.Matrix([sympy.diff(expr, s) for s in SYMBOLS])


def _sym_frame_gradient(expr: sympy.Expr) -> sympy.Matrix:
    return _sym_grad(expr).cross(_ALPHA)


def _make_fields(
    parents: Sequence[ScalarField],
    names: Sequence[str],
    sphere_fn: Callable[[np.ndarray], np.ndarray],
    rotation_fn: Callable[[np.ndarray], np.ndarray],
    symbolic_fn: Optional[Callable[[List[sympy.Expr]], Sequence[sympy.Expr]]] = None,
) -> Tuple[ScalarField, ...]:
    """
    Wrap a vector-valued kernel as one coefficient field per output component.

    sphere_fn maps sphere points (..., 3) to (..., n); rotation_fn maps an
    attitude to (n,). symbolic_fn, when given and every parent carries an
    expression, produces exact expressions instead.
    """
    if all(isinstance(p, SphereScalarField) for p in parents):
        if symbolic_fn is not None and all(p.expr is not None for p in parents):
            exprs = symbolic_fn([p.expr for p in parents])
            return tuple(
                SphereScalarField.from_sympy(sympy.expand(e), name=n) for e, n in zip(exprs, names)
            )
        return tuple(
            SphereScalarField(value=(lambda a, i=i: sphere_fn(a)[..., i]), name=n)
            for i, n in enumerate(names)
        )
    return tuple(
        RotationScalarField(value=(lambda Q, i=i: float(rotation_fn(Q)[i])), name=n)
        for i, n in enumerate(names)
    )


def _d_kernel(c: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Coefficients of d(c . lambda): k = c + (J23 - J32, J31 - J13, J12 - J21)."""
    curl = np.stack(
        [
            J[..., 1, 2] - J[..., 2, 1],
            J[..., 2, 0] - J[..., 0, 2],
            J[..., 0, 1] - J[..., 1, 0],
        ],
        axis=-1,
    )
    return c + curl


@dataclass(frozen=True)
class InvariantOneForm:
    """theta = c_1 lambda_1 + c_2 lambda_2 + c_3 lambda_3."""

    c: Tuple[ScalarField, ScalarField, ScalarField]

    @classmethod
    def basis(cls, axis: int) -> "InvariantOneForm":
        """The coframe form lambda_axis (1-based)."""
        return cls(tuple(SphereScalarField.constant(1.0 if j == axis - 1 else 0.0) for j in range(3)))

    @property
    def alpha_only(self) -> bool:
        return all(isinstance(f, SphereScalarField) for f in self.c)

    def coefficients(self, alpha: np.ndarray) -> np.ndarray:
        """Coefficients at sphere points, shape (..., 3); alpha-only forms only."""
        return stack_values(self.c, alpha)

    def coefficients_at(self, Q: np.ndarray) -> np.ndarray:
        return np.array([f.at(Q) for f in self.c])

    def pair(self, Q: np.ndarray, a: np.ndarray) -> float:
        """theta(X) for the tangent vector X with frame components a."""
        return float(np.dot(self.coefficients_at(Q), a))


@dataclass(frozen=True)
class InvariantTwoForm:
    """kappa = k_1 lambda_3^lambda_2 + k_2 lambda_1^lambda_3 + k_3 lambda_2^lambda_1."""

    k: Tuple[ScalarField, ScalarField, ScalarField]

    @classmethod
    def constant(cls, c: Sequence[float]) -> "InvariantTwoForm":
        return cls(tuple(SphereScalarField.constant(float(ci), name=f"k{i + 1}") for i, ci in enumerate(c)))

    @classmethod
    def from_expressions(cls, exprs: Sequence[Union[str, sympy.Expr]]) -> "InvariantTwoForm":
        """Coefficients from expression strings in a1, a2, a3 or sympy expressions."""
        fields = []
        for i, e in enumerate(exprs):
            if isinstance(e, sympy.Basic):
                fields.append(SphereScalarField.from_sympy(e, name=f"k{i + 1}"))
            else:
                fields.append(SphereScalarField.from_expression(e, name=f"k{i + 1}"))
        return cls(tuple(fields))

    @classmethod
    def from_vector(
        cls,
        fn: Callable[[np.ndarray], np.ndarray],
        jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> "InvariantTwoForm":
        """
        Build kappa from a vector function k(alpha).

        Args:
            fn: Maps (..., 3) to (..., 3)
            jacobian: Optional map (..., 3) -> (..., 3, 3) with [i, j] = d k_i / d a_j
        """
        fields = []
        for i in range(3):
            grad = None if jacobian is None else (lambda a, i=i: jacobian(a)[..., i, :])
            fields.append(SphereScalarField(value=(lambda a, i=i: fn(a)[..., i]), gradient=grad, name=f"k{i + 1}"))
        return cls(tuple(fields))

    @property
    def alpha_only(self) -> bool:
        return all(isinstance(f, SphereScalarField) for f in self.k)

    @property
    def is_constant(self) -> bool:
        return self.alpha_only and all(f.expr is not None and not f.expr.free_symbols for f in self.k)

    def coefficients(self, alpha: np.ndarray) -> np.ndarray:
        """Coefficient vector k at sphere points, shape (..., 3); alpha-only forms only."""
        return stack_values(self.k, alpha)

    def coefficients_at(self, Q: np.ndarray) -> np.ndarray:
        return np.array([f.at(Q) for f in self.k])

    def evaluate(self, Q: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
        """kappa(X, Y) = k . (b x a) for frame components a of X and b of Y."""
        return float(np.dot(self.coefficients_at(Q), np.cross(b, a)))


def frame_derivative(F: SphereScalarField, axis: int, alpha: np.ndarray, tol: float = config.TAU_SPHERE) -> float:
    """
    (Omega_axis F)(alpha) for an alpha-only field.

    Uses Omega_1 alpha = (0, a3, -a2), Omega_2 alpha = (-a3, 0, a1),
    Omega_3 alpha = (a2, -a1, 0) chained with the gradient of F.
    """
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    alpha = _check_sphere(alpha, tol)
    return float(F.frame_gradient(alpha)[axis - 1])


def exterior_derivative_scalar(F: ScalarField) -> InvariantOneForm:
    """dF = sum_i (Omega_i F) lambda_i."""
    label = F.name or "F"
    fields = _make_fields(
        [F],
        [f"Omega{i}({label})" for i in (1, 2, 3)],
        sphere_fn=lambda a: F.frame_gradient(a),
        rotation_fn=lambda Q: F.frame_gradient_at(Q),
        symbolic_fn=lambda e: list(_sym_frame_gradient(e[0])),
    )
    return InvariantOneForm(fields)


def exterior_derivative_oneform(theta: InvariantOneForm) -> InvariantTwoForm:
    """
    d(theta) by the Leibniz rule and d lambda_1 = lambda_3^lambda_2 (cyclic).

    With J[i][j] = Omega_j c_i the coefficients are
    k_1 = c_1 + Omega_3 c_2 - Omega_2 c_3 and cyclic.
    """
    c = theta.c

    def symbolic(exprs):
        J = sympy.Matrix.hstack(*[_sym_frame_gradient(e) for e in exprs]).T
        return [
            exprs[0] + J[1, 2] - J[2, 1],
            exprs[1] + J[2, 0] - J[0, 2],
            exprs[2] + J[0, 1] - J[1, 0],
        ]

    fields = _make_fields(
        c,
        ["k1", "k2", "k3"],
        sphere_fn=lambda a: _d_kernel(stack_values(c, a), frame_jacobian(c, a)),
        rotation_fn=lambda Q: _d_kernel(np.array([f.at(Q) for f in c]), frame_jacobian_at(c, Q)),
        symbolic_fn=symbolic,
    )
    return InvariantTwoForm(fields)


def interior_product(kappa: InvariantTwoForm, frame_components: np.ndarray) -> InvariantOneForm:
    """
    i_X kappa for the left-invariant vector X with constant frame components a.

    The result has coefficient vector a x k.
    """
    a = np.asarray(frame_components, dtype=float)
    fields = _make_fields(
        kappa.k,
        ["c1", "c2", "c3"],
        sphere_fn=lambda x: np.cross(a, stack_values(kappa.k, x)),
        rotation_fn=lambda Q: np.cross(a, kappa.coefficients_at(Q)),
        symbolic_fn=lambda e: list(sympy.Matrix([sympy.Float(ai) for ai in a]).cross(sympy.Matrix(e))),
    )
    return InvariantOneForm(fields)


def interior_symmetry(kappa: InvariantTwoForm) -> InvariantOneForm:
    """
    i_v kappa for the symmetry field v(Q) = Q hat(alpha).

    v has frame components alpha, so the coefficients are alpha x k:
    (a2 k3 - a3 k2, a3 k1 - a1 k3, a1 k2 - a2 k1).
    """
    fields = _make_fields(
        kappa.k,
        ["c1", "c2", "c3"],
        sphere_fn=lambda x: np.cross(x, stack_values(kappa.k, x)),
        rotation_fn=lambda Q: np.cross(np.asarray(Q)[0], kappa.coefficients_at(Q)),
        symbolic_fn=lambda e: list(_ALPHA.cross(sympy.Matrix(e))),
    )
    return InvariantOneForm(fields)


def pair_one_form(theta: InvariantOneForm, Q: np.ndarray, a: np.ndarray) -> float:
    return theta.pair(Q, a)


def evaluate_two_form(kappa: InvariantTwoForm, Q: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return kappa.evaluate(Q, a, b)


def closedness_residual(kappa: InvariantTwoForm, alpha: np.ndarray, tol: float = config.TAU_SPHERE) -> float:
    """
    Omega_1 k_1 + Omega_2 k_2 + Omega_3 k_3 at a sphere point.

    d kappa = -(this residual) lambda_1^lambda_2^lambda_3, so kappa is closed
    exactly where it vanishes. Equal to -alpha . curl k (see closedness_residual_curl).
    """
    alpha = _check_sphere(alpha, tol)
    return float(closedness_residuals(kappa, alpha))


def closedness_residuals(kappa: InvariantTwoForm, alphas: np.ndarray) -> np.ndarray:
    """Vectorised closedness residual at sphere points (..., 3)."""
    J = frame_jacobian(kappa.k, alphas)
    return np.trace(J, axis1=-2, axis2=-1)


def closedness_residual_curl(kappa: InvariantTwoForm, alpha: np.ndarray) -> np.ndarray:
    """Cross-check of the closedness residual: -alpha . (curl k), from ambient gradients."""
    alpha = np.asarray(alpha, dtype=float)
    G = np.stack([f.grad(alpha) for f in kappa.k], axis=-2)  # G[..., i, j] = d k_i / d a_j
    curl = np.stack(
        [G[..., 2, 1] - G[..., 1, 2], G[..., 0, 2] - G[..., 2, 0], G[..., 1, 0] - G[..., 0, 1]],
        axis=-1,
    )
    return -np.sum(alpha * curl, axis=-1)


def closedness_residual_at(kappa: InvariantTwoForm, Q: np.ndarray) -> float:
    """Closedness residual for coefficients that may depend on the whole attitude."""
    return float(np.trace(frame_jacobian_at(kappa.k, Q)))


def _contract_symmetry(theta: InvariantOneForm) -> ScalarField:
    """The function i_v theta = c . alpha."""
    (field,) = _make_fields(
        theta.c,
        ["i_v(theta)"],
        sphere_fn=lambda x: np.sum(stack_values(theta.c, x) * x, axis=-1)[..., None],
        rotation_fn=lambda Q: np.array([np.dot(theta.coefficients_at(Q), np.asarray(Q)[0])]),
        symbolic_fn=lambda e: [sum(ei * s for ei, s in zip(e, SYMBOLS))],
    )
    return field


def _three_form_contraction(kappa: InvariantTwoForm) -> InvariantTwoForm:
    """
    i_v (d kappa).

    d kappa = -rho lambda_1^lambda_2^lambda_3 with rho the closedness residual,
    and i_v(lambda_1^lambda_2^lambda_3) = -(a1 basis_1 + a2 basis_2 + a3 basis_3),
    so the coefficients are rho * alpha.
    """
    k = kappa.k

    def symbolic(exprs):
        J = sympy.Matrix.hstack(*[_sym_frame_gradient(e) for e in exprs]).T
        return list(J.trace() * _ALPHA)

    fields = _make_fields(
        k,
        ["k1", "k2", "k3"],
        sphere_fn=lambda x: closedness_residuals(kappa, x)[..., None] * x,
        rotation_fn=lambda Q: closedness_residual_at(kappa, Q) * np.asarray(Q)[0],
        symbolic_fn=symbolic,
    )
    return InvariantTwoForm(fields)


def _add_two_forms(first: InvariantTwoForm, second: InvariantTwoForm) -> InvariantTwoForm:
    parents = list(first.k) + list(second.k)
    fields = _make_fields(
        parents,
        ["k1", "k2", "k3"],
        sphere_fn=lambda x: stack_values(first.k, x) + stack_values(second.k, x),
        rotation_fn=lambda Q: first.coefficients_at(Q) + second.coefficients_at(Q),
        symbolic_fn=lambda e: [e[i] + e[i + 3] for i in range(3)],
    )
    return InvariantTwoForm(fields)


def _add_one_forms(first: InvariantOneForm, second: InvariantOneForm) -> InvariantOneForm:
    parents = list(first.c) + list(second.c)
    fields = _make_fields(
        parents,
        ["c1", "c2", "c3"],
        sphere_fn=lambda x: stack_values(first.c, x) + stack_values(second.c, x),
        rotation_fn=lambda Q: first.coefficients_at(Q) + second.coefficients_at(Q),
        symbolic_fn=lambda e: [e[i] + e[i + 3] for i in range(3)],
    )
    return InvariantOneForm(fields)


def lie_derivative(
    form: Union[InvariantOneForm, InvariantTwoForm],
) -> Union[InvariantOneForm, InvariantTwoForm]:
    """
    Lie derivative along the symmetry field v, by Cartan's formula L_v = d i_v + i_v d.

    For a 2-form with alpha-only coefficients the result vanishes; in general
    it equals sum_i (v k_i) basis_i since the coframe is left invariant.
    """
    if isinstance(form, InvariantTwoForm):
        exact_part = exterior_derivative_oneform(interior_symmetry(form))
        return _add_two_forms(exact_part, _three_form_contraction(form))
    if isinstance(form, InvariantOneForm):
        exact_part = exterior_derivative_scalar(_contract_symmetry(form))
        return _add_one_forms(exact_part, interior_symmetry(exterior_derivative_oneform(form)))
    raise TypeError(f"lie_derivative expects an invariant 1- or 2-form, got {type(form).__name__}")


def pullback_rate(form: Union[InvariantOneForm, InvariantTwoForm], Q: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """
    d/dtau of the coefficients of (psi^tau)* form at Q, by central differences.

    The symmetry action is a left translation, so the pulled-back form has
    coefficients c(psi^tau Q) in the same left-invariant basis.
    """
    fields = form.k if isinstance(form, InvariantTwoForm) else form.c
    plus = so3.symmetry_action(step, Q)
    minus = so3.symmetry_action(-step, Q)
    return np.array([(f.at(plus) - f.at(minus)) / (2.0 * step) for f in fields])


def max_closedness_residual(kappa: InvariantTwoForm, points: int = 200, rotations: int = 50) -> Tuple[float, np.ndarray]:
    """
    Worst closedness residual over a standard sample.

    Alpha-only forms are sampled on a Fibonacci sphere of `points` points,
    attitude-dependent ones at `rotations` seeded Haar rotations.

    Returns:
        (max |residual|, worst sphere point or flattened attitude)
    """
    if kappa.alpha_only:
        sample = so3.fibonacci_sphere(points)
        residuals = np.abs(closedness_residuals(kappa, sample))
    else:
        sample = so3.random_rotations(np.random.default_rng(0), rotations)
        residuals = np.abs([closedness_residual_at(kappa, Q) for Q in sample])
    worst = int(np.argmax(residuals))
    return float(residuals[worst]), np.asarray(sample[worst]).reshape(-1)
