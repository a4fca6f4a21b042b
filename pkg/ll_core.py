"""Lieb-Liniger ground-state energy density e(t) and its tabulation.

Conventions: the 1D Hamiltonian is -sum d^2/dz_i^2 + g sum_{i<j} delta(z_i - z_j)
(hbar = 2m = 1). The canonical Lieb-Liniger coupling is c = g/2, so the
dimensionless energy coefficient used everywhere in this package is

    e(t) = e_LL(t/2),   t = g/rho,

with e(t) ~ t/2 for t -> 0 and e(t) -> pi^2/3 for t -> infinity. The energy per
length of a homogeneous gas of density rho is rho^3 e(g/rho).

e_LL is obtained from the Lieb-Liniger integral equation on [-1, 1]

    rho(x) - (1/2pi) int 2 lam / (lam^2 + (x-y)^2) rho(y) dy = 1/2pi,

solved by Nystrom quadrature on Gauss-Legendre nodes. With m0 = int rho and
m2 = int x^2 rho one has gamma = lam/m0 and e_LL = m2/m0^3. Derivatives come
from differentiating the integral equation in lam, so e'(t) never relies on
finite differences of e.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import lu_factor, lu_solve
from scipy.special import roots_legendre

from errors import ConvergenceError, PreconditionError, TableValidationError


logger = logging.getLogger(__name__)

STRONG_LIMIT = math.pi ** 2 / 3
DEFAULT_T_LO = 1e-2
DEFAULT_T_HI = 1e3
DEFAULT_KNOTS_PER_DECADE = 40
DEFAULT_QUAD_ORDER = 512
TABLE_FORMAT_VERSION = 1

# second-order weak-coupling coefficient of e_LL(gamma)
_WEAK_C2 = 1.0 / 6.0 - 1.0 / math.pi ** 2

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class LLPoint:
    """Energy coefficient e(t) and its slope at one coupling ratio."""
    t: float
    e: float
    e_prime: float


# ---------------------------------------------------------------------------
# Integral equation
# ---------------------------------------------------------------------------

def _legendre_rule(quad_order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(quad_order)
    return nodes, weights


def _lieb_liniger_moments(lam: float, nodes: np.ndarray, weights: np.ndarray) -> Tuple[float, float, float, float]:
    """Return (gamma, e_LL, d gamma/d lam, d e_LL/d lam) for kernel parameter lam."""
    diff = nodes[:, None] - nodes[None, :]
    denom = lam ** 2 + diff ** 2
    kernel = (lam / np.pi) / denom * weights[None, :]
    kernel_lam = ((diff ** 2 - lam ** 2) / np.pi) / denom ** 2 * weights[None, :]

    system = lu_factor(np.eye(nodes.size) - kernel)
    rho = lu_solve(system, np.full(nodes.size, 0.5 / np.pi))
    rho_lam = lu_solve(system, kernel_lam @ rho)

    x2 = nodes ** 2
    m0 = weights @ rho
    m2 = weights @ (x2 * rho)
    dm0 = weights @ rho_lam
    dm2 = weights @ (x2 * rho_lam)

    gamma = lam / m0
    e_ll = m2 / m0 ** 3
    dgamma = (m0 - lam * dm0) / m0 ** 2
    de = dm2 / m0 ** 3 - 3.0 * m2 * dm0 / m0 ** 4
    return gamma, e_ll, dgamma, de


def _initial_kernel_parameter(gamma: float) -> float:
    if gamma < 1.0:
        return 0.5 * math.sqrt(gamma)
    return (gamma + 2.0) / math.pi


def _solve_kernel_parameter(
    gamma_target: float,
    nodes: np.ndarray,
    weights: np.ndarray,
    lam_start: Optional[float] = None,
    max_iter: int = 60,
    rtol: float = 1e-14
) -> Tuple[float, float, float]:
    """Invert gamma(lam) = gamma_target by Newton steps in log(lam).

    Returns (lam, e_LL, e_LL'(gamma)).
    """
    log_lam = math.log(lam_start if lam_start else _initial_kernel_parameter(gamma_target))
    log_target = math.log(gamma_target)

    for _ in range(max_iter):
        lam = math.exp(log_lam)
        gamma, e_ll, dgamma, de = _lieb_liniger_moments(lam, nodes, weights)
        if gamma <= 0 or dgamma <= 0:
            raise ConvergenceError(
                f"Coupling map not monotone at lambda={lam:.6g} "
                f"(quad_order={nodes.size} too small?)"
            )
        mismatch = math.log(gamma) - log_target
        if abs(mismatch) < rtol:
            return lam, e_ll, de / dgamma
        slope = lam * dgamma / gamma
        step = -mismatch / slope
        log_lam += max(-2.0, min(2.0, step))

    raise ConvergenceError(
        f"Kernel-parameter continuation did not converge for gamma={gamma_target:.6g} "
        f"after {max_iter} steps"
    )


def solve_ll_point(t: float, quad_order: int = DEFAULT_QUAD_ORDER, lam_start: Optional[float] = None) -> LLPoint:
    """Solve the integral equation for e(t) and e'(t) at one coupling ratio."""
    if not math.isfinite(t):
        raise PreconditionError(f"Coupling ratio must be finite, got {t}")
    if t < 0:
        raise PreconditionError(f"Coupling ratio must be non-negative, got {t}")
    if quad_order < 16:
        raise PreconditionError(f"quad_order must be at least 16, got {quad_order}")
    if t == 0:
        return LLPoint(t=0.0, e=0.0, e_prime=0.5)

    nodes, weights = _legendre_rule(quad_order)
    _, e_ll, slope = _solve_kernel_parameter(0.5 * t, nodes, weights, lam_start)
    return LLPoint(t=float(t), e=float(e_ll), e_prime=float(0.5 * slope))


# ---------------------------------------------------------------------------
# Asymptotic tails
# ---------------------------------------------------------------------------

def _weak_tail(t: np.ndarray, correction: float) -> Tuple[np.ndarray, np.ndarray]:
    gamma = 0.5 * t
    root = np.sqrt(gamma)
    e = gamma - (4.0 / (3.0 * np.pi)) * gamma * root + _WEAK_C2 * gamma ** 2 + correction * gamma ** 2 * root
    de = 0.5 * (1.0 - (2.0 / np.pi) * root + 2.0 * _WEAK_C2 * gamma + 2.5 * correction * gamma * root)
    return e, de


def _strong_tail(t: np.ndarray, correction: float) -> Tuple[np.ndarray, np.ndarray]:
    inv = 1.0 / t
    e = STRONG_LIMIT * (1.0 - 8.0 * inv + 48.0 * inv ** 2 + correction * inv ** 3)
    de = STRONG_LIMIT * (8.0 * inv ** 2 - 96.0 * inv ** 3 - 3.0 * correction * inv ** 4)
    return e, de


# ---------------------------------------------------------------------------
# Table
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LLEnergyTable:
    """Knots of e(t) with Hermite interpolation in log t and fitted tails.

    Immutable once built; safe for concurrent reads.
    """
    knots: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    t_lo: float
    t_hi: float
    quad_order: int
    weak_correction: float = 0.0
    strong_correction: float = 0.0
    _spline: CubicHermiteSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        derivatives = np.asarray(self.derivatives, dtype=float)
        if not (knots.shape == values.shape == derivatives.shape) or knots.size < 4:
            raise TableValidationError("knots, e and e_prime must be equal-length arrays with at least 4 entries")
        for name, array in (('knots', knots), ('values', values), ('derivatives', derivatives)):
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        spline = CubicHermiteSpline(np.log(knots), values, knots * derivatives)
        object.__setattr__(self, '_spline', spline)

    def evaluate(self, t: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """Vectorized e(t), e'(t) for t >= 0 (t = inf gives the strong limit)."""
        t = np.asarray(t, dtype=float)
        e = np.zeros_like(t)
        de = np.full_like(t, 0.5)

        weak = (t > 0) & (t < self.t_lo)
        middle = (t >= self.t_lo) & (t <= self.t_hi)
        strong = (t > self.t_hi) & np.isfinite(t)
        infinite = np.isposinf(t)

        if np.any(weak):
            e[weak], de[weak] = _weak_tail(t[weak], self.weak_correction)
        if np.any(middle):
            u = np.log(t[middle])
            e[middle] = self._spline(u)
            de[middle] = self._spline(u, 1) / t[middle]
        if np.any(strong):
            e[strong], de[strong] = _strong_tail(t[strong], self.strong_correction)
        e[infinite] = STRONG_LIMIT
        de[infinite] = 0.0
        return e, de


def eval_e(table: LLEnergyTable, t: float) -> LLPoint:
    """e(t) and e'(t) from the table; weak tail below t_lo, strong tail above t_hi."""
    if t < 0:
        raise PreconditionError(f"Coupling ratio must be non-negative, got {t}")
    e, de = table.evaluate(np.array([t], dtype=float))
    return LLPoint(t=float(t), e=float(e[0]), e_prime=float(de[0]))


def build_table(
    t_lo: float = DEFAULT_T_LO,
    t_hi: float = DEFAULT_T_HI,
    knots_per_decade: int = DEFAULT_KNOTS_PER_DECADE,
    quad_order: int = DEFAULT_QUAD_ORDER
) -> LLEnergyTable:
    """Solve the integral equation on a log-spaced knot grid and attach tails."""
    if not 0 < t_lo < t_hi:
        raise PreconditionError(f"Need 0 < t_lo < t_hi, got t_lo={t_lo}, t_hi={t_hi}")
    n_knots = int(round(math.log10(t_hi / t_lo) * knots_per_decade)) + 1
    knots = np.logspace(math.log10(t_lo), math.log10(t_hi), n_knots)
    knots[0], knots[-1] = t_lo, t_hi

    nodes, weights = _legendre_rule(quad_order)
    values = np.empty(n_knots)
    derivatives = np.empty(n_knots)
    lam = None
    logger.info("Building Lieb-Liniger table: %d knots on [%g, %g], quad_order=%d",
                n_knots, t_lo, t_hi, quad_order)
    for k, t in enumerate(knots):
        lam, e_ll, slope = _solve_kernel_parameter(0.5 * t, nodes, weights, lam_start=lam)
        values[k] = e_ll
        derivatives[k] = 0.5 * slope

    weak_base, _ = _weak_tail(np.array([t_lo]), 0.0)
    weak_correction = float((values[0] - weak_base[0]) / (0.5 * t_lo) ** 2.5)
    strong_base, _ = _strong_tail(np.array([t_hi]), 0.0)
    strong_correction = float((values[-1] / STRONG_LIMIT - strong_base[0] / STRONG_LIMIT) * t_hi ** 3)
    logger.debug("Tail corrections: weak=%.6g strong=%.6g", weak_correction, strong_correction)

    if abs(weak_correction) > 1.0:
        raise TableValidationError(
            f"Weak-coupling tail disagrees with the solver at t_lo={t_lo} "
            f"(fitted correction {weak_correction:.3g}); lower t_lo or raise quad_order"
        )
    if abs(strong_correction) / t_hi ** 3 > 1e-4:
        raise TableValidationError(
            f"Strong-coupling tail disagrees with the solver at t_hi={t_hi} "
            f"(fitted correction {strong_correction:.3g}); raise t_hi"
        )

    table = LLEnergyTable(
        knots=knots,
        values=values,
        derivatives=derivatives,
        t_lo=float(t_lo),
        t_hi=float(t_hi),
        quad_order=int(quad_order),
        weak_correction=weak_correction,
        strong_correction=strong_correction
    )
    validate_table(table)
    return table


def _second_divided_differences(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    slopes = np.diff(y) / np.diff(x)
    return 2.0 * np.diff(slopes) / (x[2:] - x[:-2])


def validate_table(table: LLEnergyTable, rtol: float = 1e-9) -> None:
    """Raise TableValidationError naming the first invariant the table violates."""
    t, e, de = table.knots, table.values, table.derivatives

    if not np.all(np.isfinite(t)) or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise TableValidationError("knots must be positive and strictly increasing")
    if not (math.isclose(t[0], table.t_lo) and math.isclose(t[-1], table.t_hi)):
        raise TableValidationError("first and last knots must equal t_lo and t_hi")
    if np.any(np.diff(e) <= 0):
        raise TableValidationError("e(t) is not strictly increasing on knots")
    if np.any(e <= 0) or np.any(e >= STRONG_LIMIT):
        raise TableValidationError("e(t) must lie in (0, pi^2/3) on knots")
    if np.any(de < 0):
        raise TableValidationError("e'(t) must be non-negative on knots")

    spacing = np.diff(t)
    curvature = _second_divided_differences(t, e)
    slack = rtol * e[1:-1] / (spacing[1:] * spacing[:-1])
    if np.any(curvature > slack):
        k = int(np.argmax(curvature - slack)) + 1
        raise TableValidationError(f"e(t) is not concave near t={t[k]:.6g}")

    if np.any(e / t > 0.5 * (1.0 + rtol)):
        raise TableValidationError("t*e(1/t) <= 1/2 violated on knots")

    u = 1.0 / t[::-1]
    cubic = u ** 3 * e[::-1]
    du = np.diff(u)
    convexity = _second_divided_differences(u, cubic)
    slack = rtol * np.abs(cubic[1:-1]) / (du[1:] * du[:-1])
    if np.any(convexity < -slack):
        k = int(np.argmin(convexity + slack)) + 1
        raise TableValidationError(f"t^3 e(1/t) is not convex near t={1.0 / u[k]:.6g}")

    # Fritsch-Carlson: Hermite segments in log t stay monotone
    log_t = np.log(t)
    secant = np.diff(e) / np.diff(log_t)
    alpha = t[:-1] * de[:-1] / secant
    beta = t[1:] * de[1:] / secant
    if np.any(alpha ** 2 + beta ** 2 > 9.0):
        k = int(np.argmax(alpha ** 2 + beta ** 2))
        raise TableValidationError(f"Hermite segment starting at t={t[k]:.6g} is not monotone")

    if abs(table.weak_correction) > 1.0 or abs(table.strong_correction) / table.t_hi ** 3 > 1e-4:
        raise TableValidationError("tail corrections are not small")


# ---------------------------------------------------------------------------
# Local energy density
# ---------------------------------------------------------------------------

def _as_output(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


def energy_density(rho: ArrayLike, g: float, table: LLEnergyTable) -> ArrayLike:
    """rho^3 e(g/rho), continuously extended by 0 at rho = 0."""
    if g < 0:
        raise PreconditionError(f"Coupling must be non-negative, got {g}")
    scalar = np.ndim(rho) == 0
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho < 0):
        raise PreconditionError("Density must be non-negative")
    result = np.zeros_like(rho)
    occupied = rho > 0
    if g > 0 and np.any(occupied):
        with np.errstate(over='ignore', divide='ignore'):
            e, _ = table.evaluate(g / rho[occupied])
        result[occupied] = rho[occupied] ** 3 * e
    return _as_output(result[0] if scalar else result, scalar)


def energy_density_derivative(rho: ArrayLike, g: float, table: LLEnergyTable) -> ArrayLike:
    """d/drho [rho^3 e(g/rho)] = 3 rho^2 e - g rho e', extended by 0 at rho = 0."""
    if g < 0:
        raise PreconditionError(f"Coupling must be non-negative, got {g}")
    scalar = np.ndim(rho) == 0
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    result = np.zeros_like(rho)
    occupied = rho > 0
    if g > 0 and np.any(occupied):
        r = rho[occupied]
        with np.errstate(over='ignore', divide='ignore'):
            e, de = table.evaluate(g / r)
        result[occupied] = 3.0 * r ** 2 * e - g * r * de
    return _as_output(result[0] if scalar else result, scalar)


# ---------------------------------------------------------------------------
# JSON codec
# ---------------------------------------------------------------------------

class LLTableFile(BaseModel):
    """On-disk layout of a tabulated e(t)."""
    version: int = Field(default=TABLE_FORMAT_VERSION)
    knots: List[float]
    e: List[float]
    e_prime: List[float]
    t_lo: float
    t_hi: float
    quad_order: int
    weak_correction: float = 0.0
    strong_correction: float = 0.0

    @field_validator('version')
    @classmethod
    def _known_version(cls, value: int) -> int:
        if value != TABLE_FORMAT_VERSION:
            raise ValueError(f"unsupported table version {value}")
        return value


def table_to_dict(table: LLEnergyTable) -> Dict:
    """Serialize a table to the versioned JSON layout."""
    return LLTableFile(
        knots=table.knots.tolist(),
        e=table.values.tolist(),
        e_prime=table.derivatives.tolist(),
        t_lo=table.t_lo,
        t_hi=table.t_hi,
        quad_order=table.quad_order,
        weak_correction=table.weak_correction,
        strong_correction=table.strong_correction
    ).model_dump()


def table_from_dict(data: Dict) -> LLEnergyTable:
    """Parse and validate a table; rejects files whose invariant checks fail."""
    try:
        layout = LLTableFile.model_validate(data)
    except ValueError as e:
        raise TableValidationError(f"Malformed table file: {e}") from e
    table = LLEnergyTable(
        knots=np.array(layout.knots),
        values=np.array(layout.e),
        derivatives=np.array(layout.e_prime),
        t_lo=layout.t_lo,
        t_hi=layout.t_hi,
        quad_order=layout.quad_order,
        weak_correction=layout.weak_correction,
        strong_correction=layout.strong_correction
    )
    validate_table(table)
    return table
