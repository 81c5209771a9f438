"""
Rotation-group primitives.

Convention: the attitude matrix Q has rows alpha, alpha', alpha'': the three
space-fixed axes written in body coordinates. With this convention the motion
satisfies dQ/dt = Q @ hat(omega), and each row r evolves by dr/dt = r x omega.
The transposed convention (columns = space axes) is obtained by replacing Q
with Q.T everywhere and left by right multiplication.

Tangent vectors to SO(3) at Q are kept in their ambient 9-component form as
3x3 arrays V with Q.T @ V skew.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import polar
from scipy.spatial.transform import Rotation

from gyrosym import config
from gyrosym.exceptions import Degenerate, NotSkew, NotTangent, OffSphere, ValidationError

logger = logging.getLogger(__name__)

RotationMatrix = np.ndarray
Vector3 = np.ndarray

IDENTITY = np.eye(3)
E1 = IDENTITY[0]


def hat(v: Vector3) -> np.ndarray:
    """
    Map a vector to the skew matrix of its cross product, hat(v) @ u = v x u.

    Args:
        v: Vector of shape (3,) or a stack of shape (..., 3)

    Returns:
        Skew matrix of shape (3, 3), or (..., 3, 3) for stacked input
    """
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(S: np.ndarray, tol: float = config.TAU_SKEW) -> Vector3:
    """
    Inverse of hat.

    Args:
        S: Skew matrix (3, 3)
        tol: Allowed norm of S + S.T

    Returns:
        Vector (S[2,1], S[0,2], S[1,0]) taken from the skew part of S
    """
    S = np.asarray(S, dtype=float)
    asym = np.linalg.norm(S + S.T)
    if asym > tol:
        raise NotSkew(f"matrix is not skew: |S + S^T| = {asym:.3e} > {tol:.1e}")
    skew = 0.5 * (S - S.T)
    return np.array([skew[2, 1], skew[0, 2], skew[1, 0]])


def frame_fields(Q: RotationMatrix) -> np.ndarray:
    """
    Body-rotation frame fields Omega_1, Omega_2, Omega_3 at Q.

    Omega_i(Q) = Q @ hat(e_i): row r of Omega_i is r x e_i, which is the
    coordinate expression rotating the body about its i-th axis.

    Returns:
        Array of shape (3, 3, 3); element [i-1] is the ambient tangent Omega_i(Q)
    """
    Q = np.asarray(Q, dtype=float)
    return np.einsum("rk,ikc->irc", Q, hat(IDENTITY))


def coframe_eval(Q: RotationMatrix, V: np.ndarray, tol: float = config.TAU_SKEW) -> Vector3:
    """
    Evaluate the left-invariant coframe (lambda_1, lambda_2, lambda_3) on V.

    For the velocity of a motion this is the inner angular velocity.

    Args:
        Q: Attitude
        V: Ambient tangent vector at Q, as a (3, 3) array or a flat 9-vector (row-major)
        tol: Skewness tolerance for Q.T @ V
    """
    Q = np.asarray(Q, dtype=float)
    V = np.asarray(V, dtype=float).reshape(3, 3)
    body = Q.T @ V
    try:
        return vee(body, tol=tol * max(1.0, np.linalg.norm(V)))
    except NotSkew as exc:
        raise NotTangent(f"vector is not tangent to SO(3) at Q: {exc}") from exc


def ambient(V: np.ndarray) -> np.ndarray:
    """Flatten a (3, 3) tangent vector to its 9 components (alpha_1 .. alpha''_3)."""
    return np.asarray(V, dtype=float).reshape(9)


def symmetry_action(tau: float, Q: RotationMatrix) -> RotationMatrix:
    """
    Rotate the body by angle tau about the first space-fixed axis.

    The first row alpha of Q is left unchanged.
    """
    return Rotation.from_rotvec(tau * E1).as_matrix() @ np.asarray(Q, dtype=float)


def symmetry_generator(Q: RotationMatrix) -> np.ndarray:
    """Generating field v(Q) = Q @ hat(alpha) of the symmetry action (equal to hat(e_1) @ Q)."""
    Q = np.asarray(Q, dtype=float)
    return Q @ hat(Q[0])


def orthonormality_error(Q: np.ndarray) -> float:
    """Max-norm of Q Q^T - I."""
    Q = np.asarray(Q, dtype=float)
    return float(np.max(np.abs(Q @ Q.T - IDENTITY)))


def validate_rotation(Q: np.ndarray, tol: float = config.TAU_ORTH) -> RotationMatrix:
    """
    Check the RotationMatrix invariants (orthonormal rows and columns, det = +1).

    Returns:
        The input as a float array

    Raises:
        Degenerate: if an invariant is violated beyond tol
    """
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (3, 3) or not np.all(np.isfinite(Q)):
        raise Degenerate(f"attitude must be a finite 3x3 matrix, got shape {Q.shape}")
    rows = orthonormality_error(Q)
    cols = float(np.max(np.abs(Q.T @ Q - IDENTITY)))
    det = float(np.linalg.det(Q))
    if max(rows, cols) > tol or abs(det - 1.0) > tol:
        raise Degenerate(
            f"not a rotation: row error {rows:.3e}, column error {cols:.3e}, det {det:.12f}"
        )
    return Q


def project_to_so3(M: np.ndarray, max_iter: int = config.POLAR_MAX_ITER) -> RotationMatrix:
    """
    Nearest rotation to M (the orthogonal polar factor).

    Uses the iteration M <- M (3I - M^T M) / 2, which converges quadratically
    near SO(3); falls back to scipy's polar decomposition when the iteration
    does not settle.

    Raises:
        Degenerate: if M is singular, has negative determinant, or both methods fail
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise Degenerate(f"cannot project a non-finite or non-3x3 array (shape {M.shape})")
    det = np.linalg.det(M)
    if abs(det) < 1e-12 * max(1.0, np.max(np.abs(M))) ** 3:
        raise Degenerate(f"matrix is singular (det = {det:.3e})")
    if det < 0:
        raise Degenerate("matrix has negative determinant; nearest orthogonal factor is a reflection")

    X = M
    prev = np.inf
    for _ in range(max_iter):
        err = float(np.max(np.abs(X.T @ X - IDENTITY)))
        if err <= 1e-15 or (err < 1e-12 and err >= prev):
            return X
        if err > 1.0:
            break
        prev = err
        X = X @ (3.0 * IDENTITY - X.T @ X) / 2.0
    else:
        if float(np.max(np.abs(X.T @ X - IDENTITY))) < 1e-12:
            return X

    logger.debug("polar iteration did not settle, using direct polar decomposition")
    U, _ = polar(M)
    if np.linalg.det(U) <= 0 or orthonormality_error(U) > 1e-12:
        raise Degenerate("polar decomposition failed to produce a rotation")
    return U


def random_rotation(rng: np.random.Generator) -> RotationMatrix:
    """Haar-distributed rotation from a normalised Gaussian quaternion."""
    q = rng.standard_normal(4)
    return Rotation.from_quat(q / np.linalg.norm(q)).as_matrix()


def random_rotations(rng: np.random.Generator, n: int) -> np.ndarray:
    """Stack of n Haar-distributed rotations, shape (n, 3, 3)."""
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return Rotation.from_quat(q).as_matrix()


def complete_rotation(alpha: Vector3, tol: float = config.TAU_SPHERE) -> RotationMatrix:
    """
    A rotation whose first row is the unit vector alpha.

    Raises:
        OffSphere: if |alpha| differs from 1 by more than tol
    """
    alpha = np.asarray(alpha, dtype=float)
    norm = np.linalg.norm(alpha)
    if abs(norm - 1.0) > tol:
        raise OffSphere(f"|alpha| = {norm:.12f} is not 1")
    helper = IDENTITY[int(np.argmin(np.abs(alpha)))]
    second = helper - np.dot(helper, alpha) * alpha
    second /= np.linalg.norm(second)
    return np.vstack([alpha, second, np.cross(alpha, second)])


def flow(Q: RotationMatrix, axis: int, t: float) -> RotationMatrix:
    """Flow of the frame field Omega_axis (1-based) for time t: Q @ exp(t hat(e_axis))."""
    return np.asarray(Q, dtype=float) @ Rotation.from_rotvec(t * IDENTITY[axis - 1]).as_matrix()


def frame_bracket_residual(Q: RotationMatrix, i: int, j: int, eps: float = 1e-4) -> float:
    """
    Compare the flow commutator of Omega_i, Omega_j with Q @ hat(e_i x e_j).

    The composite flow returns to Q + eps^2 [Omega_i, Omega_j](Q) + O(eps^3),
    so the returned max-norm difference is O(eps).
    """
    Q = np.asarray(Q, dtype=float)
    moved = flow(flow(flow(flow(Q, i, eps), j, eps), i, -eps), j, -eps)
    bracket = Q @ hat(np.cross(IDENTITY[i - 1], IDENTITY[j - 1]))
    return float(np.max(np.abs((moved - Q) / eps**2 - bracket)))


def inversion_residual(Q: RotationMatrix, V: np.ndarray) -> float:
    """
    Check d alpha^(r) = alpha^(r) x lambda for every row r along the tangent V.

    Row-wise: d alpha_1 = alpha_2 lambda_3 - alpha_3 lambda_2 and cyclic.
    """
    Q = np.asarray(Q, dtype=float)
    V = np.asarray(V, dtype=float).reshape(3, 3)
    lam = coframe_eval(Q, V)
    return float(np.max(np.abs(V - np.cross(Q, lam))))


@dataclass(frozen=True)
class BodyState:
    """Phase point: attitude Q and inner angular velocity omega."""

    Q: RotationMatrix
    omega: Vector3

    def __post_init__(self):
        object.__setattr__(self, "Q", validate_rotation(self.Q))
        omega = np.asarray(self.omega, dtype=float)
        if omega.shape != (3,) or not np.all(np.isfinite(omega)):
            raise ValidationError("omega", f"must be a finite 3-vector, got {self.omega!r}")
        object.__setattr__(self, "omega", omega)

    @property
    def alpha(self) -> Vector3:
        return self.Q[0]

    def as_tuple(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.Q, self.omega


def fibonacci_sphere(n: int) -> np.ndarray:
    """n nearly uniform unit vectors (golden-angle spiral), shape (n, 3)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def random_sphere_points(rng: np.random.Generator, n: int) -> np.ndarray:
    """n uniformly distributed unit vectors, shape (n, 3)."""
    p = rng.standard_normal((n, 3))
    return p / np.linalg.norm(p, axis=1, keepdims=True)
