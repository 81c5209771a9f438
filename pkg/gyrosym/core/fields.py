"""
Scalar fields on SO(3).

Two kinds of coefficient fields are supported:

* SphereScalarField: a function of alpha = (a1, a2, a3) only (the Poisson
  sphere). Values and gradients are vectorised over arrays of shape (..., 3);
  the function is defined on an ambient neighbourhood of the sphere and the
  gradient is the ambient Euclidean one.
* RotationScalarField: a function of the whole attitude Q. Frame derivatives
  are taken along the flows of Omega_i by central differences.

Both expose at(Q) and frame_gradient_at(Q) = (Omega_1 F, Omega_2 F, Omega_3 F)(Q).
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import sympy

from gyrosym import config
from gyrosym.core import so3
from gyrosym.utils.expressions import VARIABLES, parse_expression

SYMBOLS = VARIABLES


def _broadcast(value, shape) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), shape).astype(float)


class ScalarField(ABC):
    """Common interface of coefficient fields."""

    name: str

    @abstractmethod
    def at(self, Q: np.ndarray) -> float:
        """Value at the attitude Q."""

    @abstractmethod
    def frame_gradient_at(self, Q: np.ndarray) -> np.ndarray:
        """(Omega_1 F, Omega_2 F, Omega_3 F) at Q."""

    @property
    def alpha_only(self) -> bool:
        return False


@dataclass(frozen=True)
class SphereScalarField(ScalarField):
    """
    Function of (a1, a2, a3) with optional analytic gradient.

    Args:
        value: Callable taking an array (..., 3) and returning (...)
        gradient: Optional callable taking (..., 3) and returning (..., 3);
            central differences are used when omitted
        name: Label used in reports
        expr: Optional sympy expression in a1, a2, a3 the callables were built from
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    expr: Optional[sympy.Expr] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_sympy(cls, expr: sympy.Expr, name: str = "") -> "SphereScalarField":
        """Build a field with exact gradient from a sympy expression in a1, a2, a3."""
        expr = sympy.sympify(expr)
        value_fn = sympy.lambdify(SYMBOLS, expr, "numpy")
        grad_fn = sympy.lambdify(SYMBOLS, [sympy.diff(expr, s) for s in SYMBOLS], "numpy")

        def value(a):
            a = np.asarray(a, dtype=float)
            return _broadcast(value_fn(a[..., 0], a[..., 1], a[..., 2]), a.shape[:-1])

        def gradient(a):
            a = np.asarray(a, dtype=float)
            parts = grad_fn(a[..., 0], a[..., 1], a[..., 2])
            return np.stack([_broadcast(p, a.shape[:-1]) for p in parts], axis=-1)

        return cls(value=value, gradient=gradient, name=name or str(expr), expr=expr)

    @classmethod
    def constant(cls, c: float, name: str = "") -> "SphereScalarField":
        return cls.from_sympy(sympy.sympify(c), name=name or f"{c:g}")

    @classmethod
    def from_expression(cls, text: str, name: str = "") -> "SphereScalarField":
        """Parse an expression in a1, a2, a3 (see gyrosym.utils.expressions)."""
        return cls.from_sympy(parse_expression(text), name=name or str(text))

    @classmethod
    def coordinate(cls, axis: int) -> "SphereScalarField":
        """The coordinate function a_axis (1-based)."""
        return cls.from_sympy(SYMBOLS[axis - 1], name=f"a{axis}")

    @property
    def alpha_only(self) -> bool:
        return True

    def __call__(self, alpha: np.ndarray) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        return _broadcast(self.value(alpha), alpha.shape[:-1])

    def grad(self, alpha: np.ndarray) -> np.ndarray:
        """Ambient gradient, analytic when available, otherwise central differences."""
        alpha = np.asarray(alpha, dtype=float)
        if self.gradient is not None:
            return _broadcast(self.gradient(alpha), alpha.shape)
        h = config.FD_STEP * np.maximum(1.0, np.linalg.norm(alpha, axis=-1))[..., None]
        out = np.empty(alpha.shape)
        for j in range(3):
            step = np.zeros(alpha.shape)
            step[..., j] = h[..., 0]
            out[..., j] = (self(alpha + step) - self(alpha - step)) / (2.0 * h[..., 0])
        return out

    def frame_gradient(self, alpha: np.ndarray) -> np.ndarray:
        """
        (Omega_1 F, Omega_2 F, Omega_3 F) at sphere points.

        Omega_i alpha = alpha x e_i, hence Omega_i F = grad F . (alpha x e_i),
        which is component i of grad F x alpha. The radial part of the
        gradient drops out.
        """
        alpha = np.asarray(alpha, dtype=float)
        return np.cross(self.grad(alpha), alpha)

    def at(self, Q: np.ndarray) -> float:
        return float(self(np.asarray(Q, dtype=float)[0]))

    def frame_gradient_at(self, Q: np.ndarray) -> np.ndarray:
        return self.frame_gradient(np.asarray(Q, dtype=float)[0])


@dataclass(frozen=True)
class RotationScalarField(ScalarField):
    """
    Function of the whole attitude matrix.

    Args:
        value: Callable taking a rotation (3, 3) and returning a float
        frame_gradient: Optional callable returning (Omega_1 F, Omega_2 F, Omega_3 F)
        name: Label used in reports
        step: Flow parameter step for central differences
    """

    value: Callable[[np.ndarray], float]
    frame_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    step: float = config.FLOW_STEP

    def at(self, Q: np.ndarray) -> float:
        return float(self.value(np.asarray(Q, dtype=float)))

    def frame_gradient_at(self, Q: np.ndarray) -> np.ndarray:
        Q = np.asarray(Q, dtype=float)
        if self.frame_gradient is not None:
            return np.asarray(self.frame_gradient(Q), dtype=float)
        h = self.step
        return np.array([
            (self.at(so3.flow(Q, i, h)) - self.at(so3.flow(Q, i, -h))) / (2.0 * h)
            for i in (1, 2, 3)
        ])

    def restricted_to_sphere(self) -> SphereScalarField:
        """
        Sphere field alpha -> F(complete_rotation(alpha)).

        Only meaningful when F is invariant under the symmetry action, i.e.
        depends on the first row alone.
        """
        def value(a):
            a = np.asarray(a, dtype=float)
            flat = a.reshape(-1, 3)
            out = np.array([
                self.at(so3.complete_rotation(p / np.linalg.norm(p), tol=np.inf)) for p in flat
            ])
            return out.reshape(a.shape[:-1])

        return SphereScalarField(value=value, name=self.name)


def stack_values(fields: Sequence[SphereScalarField], alpha: np.ndarray) -> np.ndarray:
    """Evaluate several sphere fields at once, shape (..., len(fields))."""
    return np.stack([f(alpha) for f in fields], axis=-1)


def frame_jacobian(fields: Sequence[SphereScalarField], alpha: np.ndarray) -> np.ndarray:
    """J[..., i, j] = Omega_{j+1} fields[i] at sphere points."""
    return np.stack([f.frame_gradient(alpha) for f in fields], axis=-2)


def frame_jacobian_at(fields: Sequence[ScalarField], Q: np.ndarray) -> np.ndarray:
    """J[i, j] = Omega_{j+1} fields[i] at the attitude Q."""
    return np.stack([f.frame_gradient_at(Q) for f in fields])
