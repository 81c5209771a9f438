"""
Symmetry analysis for rotations about the first space-fixed axis.

The group acts by Q -> exp(tau hat(e_1)) Q, which keeps the first row alpha
of Q fixed. Functions and gyroscopic forms are invariant exactly when they
depend on alpha alone. For such a kappa the area integral
G = A w . alpha + f(alpha) exists iff the coefficient vector splits as

    k = F(alpha) alpha + grad f(alpha)

on the Poisson sphere. decompose_kappa decides this numerically: the
tangential part of k must have vanishing circulation around every cell of a
latitude-longitude mesh (and around every parallel), and f is then recovered
by integrating k along meridians from the north pole.
"""
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from numpy.polynomial.legendre import leggauss

from gyrosym import config
from gyrosym.core import so3
from gyrosym.core.fields import SYMBOLS, SphereScalarField, stack_values
from gyrosym.core.forms import (
    InvariantTwoForm,
    exterior_derivative_oneform,
    interior_symmetry,
    max_closedness_residual,
)
from gyrosym.exceptions import NotClosed, NotInvariant, PoleSingular
from gyrosym.utils.expressions import format_expression

logger = logging.getLogger(__name__)

# Minimum mesh that keeps the pole cells inside a 45 degree cap
MIN_RESOLUTION = (4, 8)
# Panels of the composite rule used to evaluate f away from mesh nodes
PATH_PANELS = 16
CHECK_POINTS = 200
INVARIANCE_SAMPLES = 200


class Verdict(str, Enum):
    EXISTS = "exists"
    FAILS = "fails"


@dataclass
class DecompositionResult:
    """
    Outcome of the splitting k = F alpha + grad f.

    F and f are set when the verdict is exists (f normalised to vanish at the
    north pole e_3). On fails the meridian reconstruction is still returned
    as partial_f, which is the best-fit f for diagnostics.
    """

    verdict: Verdict
    max_circulation: float
    path_discrepancy: float
    parallel_circulations: np.ndarray
    resolution: Tuple[int, int]
    grid: Dict[str, np.ndarray] = field(repr=False)
    F: Optional[SphereScalarField] = None
    f: Optional[SphereScalarField] = None
    residual: Optional[float] = None
    partial_f: Optional[SphereScalarField] = None

    @property
    def exists(self) -> bool:
        return self.verdict is Verdict.EXISTS

    def summary(self) -> Dict[str, Any]:
        """Plain-data view for reports."""
        return {
            "verdict": self.verdict.value,
            "resolution": list(self.resolution),
            "max_circulation": float(self.max_circulation),
            "path_discrepancy": float(self.path_discrepancy),
            "residual": None if self.residual is None else float(self.residual),
            "equator_circulation": float(self.parallel_circulations[len(self.parallel_circulations) // 2]),
        }


def check_psi_invariance(
    field_fn: Callable[[np.ndarray], float],
    samples: int = 1000,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Max |field(psi^tau Q) - field(Q)| over random attitudes and angles.

    Args:
        field_fn: Function of the attitude matrix
        samples: Number of (Q, tau) pairs
        rng: Random generator (seeded default when omitted)

    Returns:
        The maximal deviation; the field counts as invariant when it is <= TAU_INV
    """
    if samples < 1:
        raise ValueError(f"samples must be at least 1, got {samples}")
    rng = rng if rng is not None else np.random.default_rng(0)
    rotations = so3.random_rotations(rng, samples)
    taus = rng.uniform(-np.pi, np.pi, samples)
    return float(max(
        abs(field_fn(so3.symmetry_action(tau, Q)) - field_fn(Q)) for tau, Q in zip(taus, rotations)
    ))


def _sphere_coefficients(kappa: InvariantTwoForm, tau_inv: float) -> Tuple[SphereScalarField, ...]:
    """Coefficients of kappa as sphere fields, restricting invariant attitude fields."""
    out = []
    for i, coefficient in enumerate(kappa.k):
        if isinstance(coefficient, SphereScalarField):
            out.append(coefficient)
            continue
        deviation = check_psi_invariance(coefficient.at, samples=INVARIANCE_SAMPLES)
        if deviation > tau_inv:
            raise NotInvariant(
                f"coefficient k{i + 1} changes under the symmetry action (deviation {deviation:.3e})"
            )
        out.append(coefficient.restricted_to_sphere())
    return tuple(out)


def _sphere_point(theta, phi) -> np.ndarray:
    st = np.sin(theta)
    return np.stack(np.broadcast_arrays(st * np.cos(phi), st * np.sin(phi), np.cos(theta)), axis=-1)


def _d_theta(theta, phi) -> np.ndarray:
    ct = np.cos(theta)
    return np.stack(np.broadcast_arrays(ct * np.cos(phi), ct * np.sin(phi), -np.sin(theta)), axis=-1)


def _d_phi(theta, phi) -> np.ndarray:
    st = np.sin(theta)
    return np.stack(np.broadcast_arrays(-st * np.sin(phi), st * np.cos(phi), 0.0 * theta * phi), axis=-1)


class _MeridianPotential:
    """
    f(alpha) = integral of k . d alpha along the meridian from e_3 to alpha/|alpha|.

    Composite Gauss-Legendre rule; constant along rays.
    """

    def __init__(self, coefficients: Sequence[SphereScalarField], nodes: int = config.GAUSS_NODES):
        x, w = leggauss(nodes)
        panels = np.arange(PATH_PANELS)[:, None]
        self._s = ((panels + (x[None, :] + 1.0) / 2.0) / PATH_PANELS).ravel()
        self._w = np.tile(w, PATH_PANELS) / (2.0 * PATH_PANELS)
        self._k = tuple(coefficients)

    def __call__(self, alpha: np.ndarray) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        flat = alpha.reshape(-1, 3)
        norm = np.linalg.norm(flat, axis=1)
        unit = flat / np.where(norm > 0, norm, 1.0)[:, None]
        theta = np.arccos(np.clip(unit[:, 2], -1.0, 1.0))
        phi = np.arctan2(unit[:, 1], unit[:, 0])[:, None]
        nodes = theta[:, None] * self._s[None, :]
        k = stack_values(self._k, _sphere_point(nodes, phi))
        integrand = np.sum(k * _d_theta(nodes, phi), axis=-1)
        values = (integrand @ self._w) * theta
        return values.reshape(alpha.shape[:-1])


def _mesh_integrals(coefficients, nlat: int, nlon: int, nodes: int):
    """Edge integrals of k . d alpha: meridian edges (nlat, nlon), parallel edges (nlat + 1, nlon)."""
    x, w = leggauss(nodes)
    dtheta, dphi = np.pi / nlat, 2.0 * np.pi / nlon
    theta = np.linspace(0.0, np.pi, nlat + 1)
    phi = np.arange(nlon) * dphi

    t = theta[:-1, None, None] + (x + 1.0) / 2.0 * dtheta
    p = phi[None, :, None]
    k = stack_values(coefficients, _sphere_point(t, p))
    meridian = np.sum(k * _d_theta(t, p), axis=-1) @ w * (dtheta / 2.0)

    t = theta[:, None, None]
    p = phi[None, :, None] + (x + 1.0) / 2.0 * dphi
    k = stack_values(coefficients, _sphere_point(t, p))
    parallel = np.sum(k * _d_phi(t, p), axis=-1) @ w * (dphi / 2.0)
    return theta, phi, meridian, parallel


def _radial_part(coefficients: Sequence[SphereScalarField]) -> SphereScalarField:
    if all(c.expr is not None for c in coefficients):
        return SphereScalarField.from_sympy(
            sympy.expand(sum(c.expr * s for c, s in zip(coefficients, SYMBOLS))), name="F"
        )
    return SphereScalarField(
        value=lambda a: np.sum(stack_values(coefficients, a) * np.asarray(a, dtype=float), axis=-1),
        name="F",
    )


def decompose_kappa(
    kappa: InvariantTwoForm,
    resolution: Tuple[int, int] = config.DEFAULT_GRID,
    tau_circ: float = config.TAU_CIRC,
    tau_dec: float = config.TAU_DEC,
    tau_inv: float = config.TAU_INV,
    check_points: int = CHECK_POINTS,
    seed: int = 0,
) -> DecompositionResult:
    """
    Decide whether k = F alpha + grad f and reconstruct F and f.

    Args:
        kappa: Gyroscopic form; coefficients must be invariant
        resolution: (latitude cells, longitude cells) of the mesh
        tau_circ: Allowed circulation per unit enclosed area
        tau_dec: Allowed |(k - grad f) x alpha| at the check points
        tau_inv: Invariance tolerance for attitude-dependent coefficients
        check_points: Number of random points for the pointwise check
        seed: Seed of the check points

    Raises:
        NotInvariant: a coefficient depends on more than alpha
        PoleSingular: resolution too coarse to bound the pole cells
    """
    nlat, nlon = int(resolution[0]), int(resolution[1])
    if nlat < MIN_RESOLUTION[0] or nlon < MIN_RESOLUTION[1]:
        raise PoleSingular(f"resolution {nlat}x{nlon} is below the minimum {MIN_RESOLUTION[0]}x{MIN_RESOLUTION[1]}")
    coefficients = _sphere_coefficients(kappa, tau_inv)

    theta, phi, meridian, parallel = _mesh_integrals(coefficients, nlat, nlon, config.GAUSS_NODES)
    dphi = 2.0 * np.pi / nlon
    cells = meridian + parallel[1:] - np.roll(meridian, -1, axis=1) - parallel[:-1]
    area = (np.cos(theta[:-1]) - np.cos(theta[1:]))[:, None] * dphi
    parallels = parallel.sum(axis=1)
    cap = 2.0 * np.pi * np.minimum(1.0 - np.cos(theta), 1.0 + np.cos(theta))
    max_circulation = float(max(np.max(np.abs(cells)), np.max(np.abs(parallels))))
    cells_ok = bool(np.all(np.abs(cells) <= tau_circ * area))
    # the first and last parallels degenerate to the poles
    parallels_ok = bool(np.all(np.abs(parallels[1:-1]) <= tau_circ * cap[1:-1]))
    logger.info(
        "decomposition mesh %dx%d: max circulation %.3e (cells ok=%s, parallels ok=%s)",
        nlat, nlon, max_circulation, cells_ok, parallels_ok,
    )

    # f at mesh nodes from the north pole, and again along a path through the south pole
    north = np.vstack([np.zeros(nlon), np.cumsum(meridian, axis=0)])
    south_value = north[-1, 0]
    south = south_value - np.vstack([np.cumsum(meridian[::-1], axis=0)[::-1], np.zeros(nlon)])
    path_discrepancy = float(np.max(np.abs(north - south)))

    potential = _MeridianPotential(coefficients)
    f = SphereScalarField(value=potential, name="f")
    F = _radial_part(coefficients)
    nodes = _sphere_point(theta[:, None], phi[None, :])
    grid = {"theta": theta, "phi": phi, "f": north, "F": F(nodes)}

    common = dict(
        max_circulation=max_circulation,
        path_discrepancy=path_discrepancy,
        parallel_circulations=parallels,
        resolution=(nlat, nlon),
        grid=grid,
    )
    if not (cells_ok and parallels_ok):
        return DecompositionResult(verdict=Verdict.FAILS, partial_f=f, **common)

    points = so3.random_sphere_points(np.random.default_rng(seed), check_points)
    k = stack_values(coefficients, points)
    residual = float(np.max(np.linalg.norm(np.cross(k - f.grad(points), points), axis=-1)))
    if residual > tau_dec:
        logger.warning("circulations vanish but (k - grad f) x alpha reaches %.3e > %.1e", residual, tau_dec)
        return DecompositionResult(verdict=Verdict.FAILS, partial_f=f, residual=residual, **common)
    return DecompositionResult(verdict=Verdict.EXISTS, F=F, f=f, residual=residual, **common)


def exactness_verdict(
    kappa: InvariantTwoForm,
    resolution: Tuple[int, int] = config.DEFAULT_GRID,
    tau_closed: float = config.TAU_CLOSED,
) -> Verdict:
    """
    Whether the 1-form i_v kappa is exact, i.e. whether the area integral exists.

    For the rotation group about the first space axis this is the same
    question as the splitting k = F alpha + grad f, so the decision is taken
    by decompose_kappa.

    Raises:
        NotClosed: kappa fails the closedness test
    """
    residual, worst = max_closedness_residual(kappa)
    if residual > tau_closed:
        raise NotClosed(f"closedness residual {residual:.3e} at {np.round(worst, 6).tolist()}")
    if kappa.alpha_only:
        contraction = exterior_derivative_oneform(interior_symmetry(kappa))
        sample = so3.fibonacci_sphere(CHECK_POINTS)
        logger.debug("max |d(i_v kappa)| = %.3e", float(np.max(np.abs(contraction.coefficients(sample)))))
    return decompose_kappa(kappa, resolution=resolution).verdict


def involution_check(
    K: Callable[[np.ndarray, np.ndarray], float],
    samples: int = 1000,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Max |K(psi^tau Q, w) - K(Q, w)| over random (Q, w, tau).

    The lifted action leaves the body angular velocity unchanged. K Poisson
    commutes with the area integral iff the deviation vanishes, which happens
    iff K depends on (w, alpha) only.
    """
    if samples < 1:
        raise ValueError(f"samples must be at least 1, got {samples}")
    rng = rng if rng is not None else np.random.default_rng(0)
    rotations = so3.random_rotations(rng, samples)
    omegas = rng.standard_normal((samples, 3))
    taus = rng.uniform(-np.pi, np.pi, samples)
    return float(max(
        abs(K(so3.symmetry_action(tau, Q), w) - K(Q, w)) for tau, Q, w in zip(taus, rotations, omegas)
    ))


def is_in_involution(K, samples: int = 1000, tol: float = config.TAU_INV) -> bool:
    return involution_check(K, samples) <= tol


def bracket_along_trajectory(
    K: Callable[[np.ndarray, np.ndarray], float],
    trajectory: Sequence,
    step: float = 1e-3,
) -> np.ndarray:
    """
    {K, G} at each trajectory point, as the derivative of K along the lifted action.

    Central differences in the group parameter; points need their attitude
    (full-method trajectories).
    """
    values = []
    for point in trajectory:
        Q = point.state.Q
        plus = K(so3.symmetry_action(step, Q), point.omega)
        minus = K(so3.symmetry_action(-step, Q), point.omega)
        values.append((plus - minus) / (2.0 * step))
    return np.array(values)


@dataclass(frozen=True)
class PolynomialKappa:
    """A seeded kappa of the form F alpha + grad f with polynomial F, f."""

    F: sympy.Expr
    f: sympy.Expr
    kappa: Tuple[str, str, str]

    def form(self) -> InvariantTwoForm:
        return InvariantTwoForm.from_expressions(self.kappa)


def _random_polynomial(rng: np.random.Generator, degree: int) -> sympy.Expr:
    monomials = sorted(sympy.itermonomials(SYMBOLS, degree), key=sympy.default_sort_key)
    coefficients = rng.integers(-1000, 1001, len(monomials))
    return sum(sympy.Rational(int(c), 1000) * m for c, m in zip(coefficients, monomials))


def random_polynomial_kappa(rng: np.random.Generator, degree: int = 3) -> PolynomialKappa:
    """Random F, f of the given degree and k = F alpha + grad f as expression strings."""
    F = _random_polynomial(rng, degree)
    f = _random_polynomial(rng, degree)
    k = [sympy.expand(F * s + sympy.diff(f, s)) for s in SYMBOLS]
    return PolynomialKappa(F=F, f=f, kappa=tuple(format_expression(e) for e in k))


@dataclass
class SearchResult:
    candidates: int = 0
    closed: int = 0
    exact: int = 0
    closed_nonexact: List[Tuple[str, str, str]] = field(default_factory=list)


def _search_candidates(max_degree: int):
    monomials = sorted(sympy.itermonomials(SYMBOLS, max_degree), key=sympy.default_sort_key)
    single = []
    for m, axis in itertools.product(monomials, range(3)):
        k = [sympy.Integer(0)] * 3
        k[axis] = m
        single.append(k)
    yield from single
    for first, second in itertools.combinations(single, 2):
        yield [a + b for a, b in zip(first, second)]
    alpha = sympy.Matrix(SYMBOLS)
    for m, axis in itertools.product(monomials, range(3)):
        yield list(m * sympy.Matrix(so3.IDENTITY[axis].astype(int).tolist()).cross(alpha))


def search_closed_nonexact(
    max_degree: int = 2,
    resolution: Tuple[int, int] = (24, 48),
    tau_closed: float = config.TAU_CLOSED,
) -> SearchResult:
    """
    Brute-force search for a closed kappa without an area integral.

    Candidates are built from monomials of degree <= max_degree: single
    components, pairwise sums of those, and rotational fields m(alpha) e_j x alpha.
    Closed candidates go through decompose_kappa. A closed alpha-only kappa has
    zero circulation around every cell (the circulation is the surface integral
    of the closedness residual), so the search is expected to come back empty.
    """
    result = SearchResult()
    for exprs in _search_candidates(max_degree):
        result.candidates += 1
        kappa = InvariantTwoForm.from_expressions(exprs)
        residual, _ = max_closedness_residual(kappa, points=100)
        if residual > tau_closed:
            continue
        result.closed += 1
        if decompose_kappa(kappa, resolution=resolution, check_points=50).exists:
            result.exact += 1
        else:
            result.closed_nonexact.append(tuple(format_expression(e) for e in exprs))
    logger.info(
        "searched %d candidates: %d closed, %d exact, %d closed without area integral",
        result.candidates, result.closed, result.exact, len(result.closed_nonexact),
    )
    return result
