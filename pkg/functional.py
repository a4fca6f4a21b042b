"""The 1D energy functional and its constrained minimizer.

    E[rho] = int |d sqrt(rho)/dz|^2 + V_L(z) rho + F(rho) dz,   int rho = N,

with F(rho) = rho^3 e(g/rho) for the full Lieb-Liniger functional. The same
machinery minimizes the regime functionals by swapping the local interaction
(mean field, fermionized, none) or dropping the gradient term.

Minimization works on psi = sqrt(rho) on a uniform grid with Dirichlet ends.
Far from the minimizer each step solves (I + tau (H_k - sigma)) psi_new = psi_k
with the potential frozen at the current density, renormalizes, and accepts
the step only if the energy does not increase. tau backtracks and never
exceeds FLOW_TAU_CAP / (mu - sigma). sigma is the lowest eigenvalue of
-d^2/dz^2 + V on the grid, which keeps the shifted operator positive so psi
stays nonnegative. Once the residual is below NEWTON_SWITCH, damped Newton
steps on the bordered system take over; the flow alone stalls where energy
differences drop below rounding.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.integrate import trapezoid
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from errors import ConvergenceError, DomainTooSmallError, GridResolutionError, PreconditionError
from ll_core import STRONG_LIMIT, LLEnergyTable, energy_density, energy_density_derivative


logger = logging.getLogger(__name__)

HARD_WALL = math.inf
DEFAULT_GRID_POINTS = 4097
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100_000
EDGE_DECAY = 1e-8
DOMAIN_SAFETY = 3.0
ENERGY_SLACK = 1e-13
FLOW_TAU_CAP = 4.0
NEWTON_SWITCH = 1e-2
NEWTON_RETRY = 25
NEWTON_HALVINGS = 30


# ---------------------------------------------------------------------------
# Grids, traps, profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    """Uniform grid including both endpoints."""
    z_min: float
    z_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 64:
            raise PreconditionError(f"Grid needs at least 64 points, got {self.n_points}")
        if not self.z_max > self.z_min:
            raise PreconditionError(f"Empty grid interval [{self.z_min}, {self.z_max}]")

    @classmethod
    def symmetric(cls, half_width: float, n_points: int = DEFAULT_GRID_POINTS) -> 'Grid1D':
        return cls(-half_width, half_width, n_points)

    @property
    def spacing(self) -> float:
        return (self.z_max - self.z_min) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.n_points)

    def scaled(self, factor: float) -> 'Grid1D':
        return Grid1D(self.z_min * factor, self.z_max * factor, self.n_points)

    def refined(self) -> 'Grid1D':
        return Grid1D(self.z_min, self.z_max, 2 * self.n_points - 1)

    def coarsened(self) -> 'Grid1D':
        if self.n_points % 2 == 0:
            raise PreconditionError("Only grids with an odd number of points can be coarsened")
        return Grid1D(self.z_min, self.z_max, (self.n_points + 1) // 2)

    def covers(self, half_width: float, margin: float = 0.2) -> bool:
        reach = (1.0 + margin) * half_width
        return self.z_min <= -reach and self.z_max >= reach


@dataclass(frozen=True)
class TrapSpec:
    """Longitudinal trap V_L(z) = |z/L|^s / L^2; s = HARD_WALL is a box [-L, L]."""
    s: float = 2.0
    L: float = 1.0

    def __post_init__(self):
        if not self.s > 0:
            raise PreconditionError(f"Trap exponent must be positive, got {self.s}")
        if not self.L > 0:
            raise PreconditionError(f"Trap length must be positive, got {self.L}")

    @property
    def is_hard_wall(self) -> bool:
        return math.isinf(self.s)

    def potential(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.is_hard_wall:
            return np.zeros_like(z)
        return np.abs(z / self.L) ** self.s / self.L ** 2

    def reduced(self) -> 'TrapSpec':
        return TrapSpec(self.s, 1.0)

    def check_grid(self, grid: Grid1D) -> None:
        if self.is_hard_wall and not (
            math.isclose(grid.z_min, -self.L, rel_tol=1e-12) and math.isclose(grid.z_max, self.L, rel_tol=1e-12)
        ):
            raise PreconditionError(f"Hard-wall grids must span exactly [-{self.L}, {self.L}]")


@dataclass(frozen=True, eq=False)
class DensityProfile:
    """Nonnegative density samples on a grid with fixed mass."""
    grid: Grid1D
    values: np.ndarray
    mass: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise PreconditionError("Profile values must match the grid")
        if np.any(values < 0):
            raise PreconditionError("Density values must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def normalized(cls, grid: Grid1D, values: np.ndarray, mass: float) -> 'DensityProfile':
        values = np.clip(np.asarray(values, dtype=float), 0.0, None)
        total = trapezoid(values, dx=grid.spacing)
        if total <= 0:
            raise PreconditionError("Cannot normalize an empty profile")
        return cls(grid, values * (mass / total), float(mass))

    def integral(self) -> float:
        return float(trapezoid(self.values, dx=self.grid.spacing))

    def edge_ratio(self) -> float:
        """Largest density next to the domain ends relative to the maximum."""
        peak = self.values.max()
        edges = max(self.values[0], self.values[1], self.values[-2], self.values[-1])
        return float(edges / peak) if peak > 0 else 0.0

    def sqrt_values(self) -> np.ndarray:
        return np.sqrt(self.values)

    def to_csv(self, path: str) -> None:
        np.savetxt(path, np.column_stack([self.grid.points, self.values]),
                   delimiter=',', header='z,rho', comments='', fmt='%.17g')


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    interaction: float
    total: float
    chemical_potential: Optional[float] = None

    @classmethod
    def from_terms(cls, kinetic: float, potential: float, interaction: float,
                   chemical_potential: Optional[float] = None) -> 'EnergyBreakdown':
        return cls(float(kinetic), float(potential), float(interaction),
                   float(kinetic + potential + interaction), chemical_potential)

    def scaled(self, factor: float, mu_factor: Optional[float] = None) -> 'EnergyBreakdown':
        """Multiply the energy terms by `factor` and mu by `mu_factor` (default `factor`)."""
        mu_factor = factor if mu_factor is None else mu_factor
        mu = None if self.chemical_potential is None else self.chemical_potential * mu_factor
        return EnergyBreakdown(self.kinetic * factor, self.potential * factor,
                               self.interaction * factor, self.total * factor, mu)

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {
            'kinetic': self.kinetic,
            'potential': self.potential,
            'interaction': self.interaction,
            'total': self.total,
            'chemical_potential': self.chemical_potential
        }


# ---------------------------------------------------------------------------
# Local interactions
# ---------------------------------------------------------------------------

class LocalInteraction:
    """Local energy density F(rho) with derivative f(rho); F(0) = f(0) = 0."""
    name = 'none'
    bisection_steps = 100

    def density(self, rho: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(rho, dtype=float))

    def derivative(self, rho: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(rho, dtype=float))

    def slope(self, rho: np.ndarray) -> np.ndarray:
        """rho f'(rho) by a relative central difference."""
        rho = np.asarray(rho, dtype=float)
        step = 1e-6
        return (self.derivative(rho * (1.0 + step)) - self.derivative(rho * (1.0 - step))) / (2.0 * step)

    @property
    def invertible(self) -> bool:
        return True

    def _upper_guess(self, target: np.ndarray) -> np.ndarray:
        return np.maximum(np.sqrt(target), target)

    def inverse_derivative(self, y: np.ndarray) -> np.ndarray:
        """Solve f(rho) = y pointwise; y <= 0 maps to rho = 0."""
        if not self.invertible:
            raise PreconditionError(f"Interaction '{self.name}' has no invertible derivative")
        y = np.asarray(y, dtype=float)
        rho = np.zeros_like(y)
        positive = y > 0
        if not np.any(positive):
            return rho
        target = y[positive]
        hi = self._upper_guess(target)
        for _ in range(200):
            short = self.derivative(hi) < target
            if not np.any(short):
                break
            hi[short] *= 2.0
        else:
            raise ConvergenceError(f"Could not bracket the inverse of f for '{self.name}'")
        lo = np.zeros_like(hi)
        for _ in range(self.bisection_steps):
            mid = 0.5 * (lo + hi)
            below = self.derivative(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        rho[positive] = 0.5 * (lo + hi)
        return rho


class NoInteraction(LocalInteraction):
    name = 'none'

    @property
    def invertible(self) -> bool:
        return False


class MeanFieldInteraction(LocalInteraction):
    """F = g rho^2 / 2."""
    name = 'mean-field'

    def __init__(self, g: float):
        if g < 0:
            raise PreconditionError(f"Coupling must be non-negative, got {g}")
        self.g = float(g)

    def density(self, rho):
        return 0.5 * self.g * np.asarray(rho, dtype=float) ** 2

    def derivative(self, rho):
        return self.g * np.asarray(rho, dtype=float)

    def slope(self, rho):
        return self.derivative(rho)

    @property
    def invertible(self) -> bool:
        return self.g > 0

    def inverse_derivative(self, y):
        if not self.invertible:
            raise PreconditionError("Mean-field inverse needs g > 0")
        return np.maximum(np.asarray(y, dtype=float), 0.0) / self.g


class FermionizedInteraction(LocalInteraction):
    """F = (pi^2/3) rho^3, the impenetrable limit."""
    name = 'fermionized'

    def density(self, rho):
        return STRONG_LIMIT * np.asarray(rho, dtype=float) ** 3

    def derivative(self, rho):
        return math.pi ** 2 * np.asarray(rho, dtype=float) ** 2

    def slope(self, rho):
        return 2.0 * self.derivative(rho)

    def inverse_derivative(self, y):
        return np.sqrt(np.maximum(np.asarray(y, dtype=float), 0.0)) / math.pi


class LiebLinigerInteraction(LocalInteraction):
    """F = rho^3 e(g/rho) from the tabulated e."""
    name = 'lieb-liniger'

    def __init__(self, g: float, table: LLEnergyTable):
        if g < 0:
            raise PreconditionError(f"Coupling must be non-negative, got {g}")
        self.g = float(g)
        self.table = table

    def density(self, rho):
        return np.atleast_1d(energy_density(np.asarray(rho, dtype=float), self.g, self.table))

    def derivative(self, rho):
        return np.atleast_1d(energy_density_derivative(np.asarray(rho, dtype=float), self.g, self.table))

    @property
    def invertible(self) -> bool:
        return self.g > 0

    def _upper_guess(self, target):
        return np.maximum(target / self.g, np.sqrt(target) / math.pi)


def resolve_interaction(g: float, table: Optional[LLEnergyTable],
                        interaction: Optional[LocalInteraction]) -> LocalInteraction:
    if interaction is not None:
        return interaction
    if g == 0:
        return NoInteraction()
    if table is None:
        raise PreconditionError("A Lieb-Liniger table is required for g > 0")
    return LiebLinigerInteraction(g, table)


# ---------------------------------------------------------------------------
# Energies and residuals
# ---------------------------------------------------------------------------

def evaluate_energy(values: np.ndarray, grid: Grid1D, trap: TrapSpec,
                    interaction: LocalInteraction, kinetic: bool = True) -> EnergyBreakdown:
    """Discrete functional: forward-difference gradient term, trapezoid elsewhere."""
    values = np.asarray(values, dtype=float)
    h = grid.spacing
    psi = np.sqrt(np.clip(values, 0.0, None))
    gradient = float(np.sum(np.diff(psi) ** 2) / h) if kinetic else 0.0
    potential = trapezoid(trap.potential(grid.points) * values, dx=h)
    local = trapezoid(interaction.density(values), dx=h)
    return EnergyBreakdown.from_terms(gradient, potential, local)


def _laplacian_apply(psi: np.ndarray, h: float) -> np.ndarray:
    """-psi'' on interior points with zero Dirichlet values outside."""
    padded = np.concatenate(([0.0], psi, [0.0]))
    return (2.0 * padded[1:-1] - padded[:-2] - padded[2:]) / h ** 2


def euler_lagrange_residual(profile: DensityProfile, trap: TrapSpec, interaction: LocalInteraction,
                            kinetic: bool = True, cutoff: float = 1e-6) -> Tuple[np.ndarray, float]:
    """Local chemical potential on rho > cutoff*max and its relative spread."""
    values = profile.values
    h = profile.grid.spacing
    interior = slice(1, -1)
    psi = np.sqrt(values[interior])
    local_mu = trap.potential(profile.grid.points[interior]) + interaction.derivative(values[interior])
    if kinetic:
        local_mu = local_mu + _laplacian_apply(psi, h) / np.where(psi > 0, psi, 1.0)
    support = values[interior] > cutoff * values.max()
    mu = local_mu[support]
    spread = float((mu.max() - mu.min()) / abs(mu.mean())) if mu.size else 0.0
    return mu, spread


def mean_density(rho: DensityProfile) -> float:
    """rho_bar = (1/N) int rho^2."""
    return float(trapezoid(rho.values ** 2, dx=rho.grid.spacing) / rho.mass)


# ---------------------------------------------------------------------------
# Grid sizing and the ideal gas
# ---------------------------------------------------------------------------

def support_half_width(N: float, trap: TrapSpec, g: float,
                       interaction: Optional[LocalInteraction] = None) -> float:
    """Length scale of the minimizer, at least 2L.

    The LL cloud is no wider than either the TF or the GT cloud, so it uses
    min(Lbar_TF, Lbar_LL); the regime functionals use their own extent.
    """
    if trap.is_hard_wall:
        return trap.L
    from regimes import region_length_scales

    name = interaction.name if interaction is not None else LiebLinigerInteraction.name
    scales = region_length_scales(N, trap.L, g, trap.s)
    if name == MeanFieldInteraction.name:
        extent = scales['Lbar_TF']
    elif name == FermionizedInteraction.name:
        extent = scales['Lbar_LL']
    elif name == LiebLinigerInteraction.name:
        extent = min(scales['Lbar_TF'], scales['Lbar_LL'])
    else:
        extent = 0.0
    return max(2.0 * trap.L, extent)


def auto_grid(N: float, trap: TrapSpec, g: float, n_points: int = DEFAULT_GRID_POINTS,
              interaction: Optional[LocalInteraction] = None) -> Grid1D:
    """Domain sized from the regime length scales with safety factor 3."""
    if trap.is_hard_wall:
        return Grid1D(-trap.L, trap.L, n_points)
    return Grid1D.symmetric(DOMAIN_SAFETY * support_half_width(N, trap, g, interaction), n_points)


def _dirichlet_lowest(potential: np.ndarray, h: float) -> Tuple[float, np.ndarray]:
    diagonal = 2.0 / h ** 2 + potential
    off = np.full(potential.size - 1, -1.0 / h ** 2)
    w, v = eigh_tridiagonal(diagonal, off, select='i', select_range=(0, 0))
    return float(w[0]), np.abs(v[:, 0])


def _lowest_on(trap: TrapSpec, grid: Grid1D) -> Tuple[float, np.ndarray]:
    return _dirichlet_lowest(trap.potential(grid.points[1:-1]), grid.spacing)


def longitudinal_ground_state(trap: TrapSpec, grid: Optional[Grid1D] = None,
                              tol: float = 1e-6) -> Tuple[float, DensityProfile]:
    """Lowest eigenpair of -d^2/dz^2 + V_L(z), Richardson-extrapolated in h^2.

    For L = 1 the eigenvalue is e_parallel; in general it is e_parallel / L^2.
    The profile is the squared fine-grid eigenvector normalized to 1.
    """
    if grid is None:
        if trap.is_hard_wall:
            grid = Grid1D(-trap.L, trap.L, 4001)
        else:
            grid = Grid1D.symmetric(trap.L * 8.0 ** max(1.0, 1.0 / trap.s), 4001)
    trap.check_grid(grid)
    if (grid.n_points - 1) % 4 != 0:
        raise PreconditionError("Grid for the longitudinal eigensolve needs n_points = 4k + 1")

    middle = grid.coarsened()
    coarse = middle.coarsened()
    e_fine, vector = _lowest_on(trap, grid)
    e_middle, _ = _lowest_on(trap, middle)
    e_coarse, _ = _lowest_on(trap, coarse)

    extrapolated = (4.0 * e_fine - e_middle) / 3.0
    previous = (4.0 * e_middle - e_coarse) / 3.0
    if abs(extrapolated - previous) > tol * max(1.0, abs(extrapolated)):
        raise GridResolutionError(
            f"Longitudinal eigenvalue moves by {abs(extrapolated - previous):.3g} under refinement "
            f"(tol {tol:g}); refine the grid"
        )

    values = np.zeros(grid.n_points)
    values[1:-1] = vector ** 2
    return extrapolated, DensityProfile.normalized(grid, values, 1.0)


# ---------------------------------------------------------------------------
# Constrained minimization shared by the 1D, auxiliary and 3D functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConstrainedProblem:
    """Minimize energy(w) subject to weight * |w|^2 = mass.

    The energy gradient is proportional to (A + diag(q(w))) w with A symmetric,
    A >= floor and q >= 0; `slope(w)` returns w dq/dw, the extra diagonal of
    the Newton Jacobian.
    """
    operator: sparse.csc_matrix
    floor: float
    weight: float
    mass: float
    energy: Callable[[np.ndarray], float]
    frozen: Callable[[np.ndarray], np.ndarray]
    slope: Callable[[np.ndarray], np.ndarray]
    label: str = 'minimizer'

    def normalize(self, w: np.ndarray) -> np.ndarray:
        return w * math.sqrt(self.mass / (self.weight * np.dot(w, w)))

    def rayleigh(self, w: np.ndarray) -> Tuple[float, float, np.ndarray]:
        """Rayleigh quotient mu, relative residual |Hw - mu w| / (|mu| |w|) and q(w)."""
        q = self.frozen(w)
        hw = self.operator @ w + q * w
        norm2 = float(np.dot(w, w))
        mu = float(np.dot(w, hw) / norm2)
        residual = float(np.linalg.norm(hw - mu * w) / (abs(mu) * math.sqrt(norm2)))
        return mu, residual, q


def _not_higher(trial: float, current: float) -> bool:
    return trial <= current + ENERGY_SLACK * max(1.0, abs(current))


def _flow_step(problem: ConstrainedProblem, w: np.ndarray, q: np.ndarray, mu: float, current: float,
               tau: float, identity: sparse.csc_matrix) -> Tuple[np.ndarray, float, float]:
    """One accepted implicit step (I + tau (A + q - floor)) w_new = w; tau stays below the cap."""
    gap = max(mu - problem.floor, 1e-12)
    cap = FLOW_TAU_CAP / gap
    tau = min(tau, cap)
    shifted = problem.operator + sparse.diags(q - problem.floor)
    while True:
        candidate = problem.normalize(splu((identity + tau * shifted).tocsc()).solve(w))
        trial = problem.energy(candidate)
        if _not_higher(trial, current):
            return candidate, trial, min(1.5 * tau, cap)
        tau *= 0.5
        if tau * gap < 1e-14:
            raise ConvergenceError(f"{problem.label}: flow step size collapsed")


def _newton_step(problem: ConstrainedProblem, w: np.ndarray, q: np.ndarray, mu: float, residual: float,
                 current: float) -> Optional[Tuple[np.ndarray, float]]:
    """Damped Newton step on H(w) w = mu w with the mass constraint as a bordering row.

    A step is taken only if it lowers the residual without raising the energy;
    None means no damping factor achieved that.
    """
    n = w.size
    jacobian = problem.operator + sparse.diags(q + problem.slope(w) - mu)
    border = sparse.csc_matrix(w.reshape(-1, 1))
    system = sparse.bmat([[jacobian, -border], [problem.weight * border.T, None]], format='csc')
    rhs = np.concatenate([-(problem.operator @ w + (q - mu) * w), [0.0]])
    try:
        delta = splu(system).solve(rhs)[:n]
    except RuntimeError:
        return None
    alpha = 1.0
    for _ in range(NEWTON_HALVINGS):
        candidate = problem.normalize(w + alpha * delta)
        _, trial_residual, _ = problem.rayleigh(candidate)
        if trial_residual < (1.0 - 1e-4 * alpha) * residual:
            trial = problem.energy(candidate)
            if _not_higher(trial, current):
                return candidate, trial
        alpha *= 0.5
    return None


def minimize_constrained(problem: ConstrainedProblem, start: np.ndarray, tol: float, max_iter: int,
                         callback: Optional[Callable[[int, float], None]] = None
                         ) -> Tuple[np.ndarray, float, float]:
    """Implicit gradient flow down to NEWTON_SWITCH, damped Newton below it.

    Returns (w, energy, mu). Every accepted step keeps the energy from rising,
    and `callback(iteration, energy)` sees each of them.
    """
    w = problem.normalize(np.asarray(start, dtype=float))
    current = problem.energy(w)
    identity = sparse.identity(w.size, format='csc')
    retry_at = 0
    tau = None
    residual = math.inf
    for iteration in range(max_iter):
        mu, residual, q = problem.rayleigh(w)
        if residual < tol:
            logger.debug("%s converged in %d iterations, mu=%.12g", problem.label, iteration, mu)
            return w, current, mu
        newton = residual < NEWTON_SWITCH and iteration >= retry_at
        step = _newton_step(problem, w, q, mu, residual, current) if newton else None
        if step is not None:
            w, current = step
        else:
            if newton:
                retry_at = iteration + NEWTON_RETRY
                logger.debug("%s: Newton step rejected at residual %.3g", problem.label, residual)
            if tau is None:
                tau = 1.0 / max(mu - problem.floor, 1e-12)
            w, current, tau = _flow_step(problem, w, q, mu, current, tau, identity)
        if callback is not None:
            callback(iteration, current)
    raise ConvergenceError(
        f"{problem.label}: no convergence within {max_iter} iterations (residual {residual:.3g}, tol {tol:g})"
    )


# ---------------------------------------------------------------------------
# Minimizers
# ---------------------------------------------------------------------------

def _initial_psi(start: str, z: np.ndarray, half_width: float) -> np.ndarray:
    if start == 'uniform':
        return np.ones_like(z)
    if start == 'gaussian':
        width = half_width / (2.0 * DOMAIN_SAFETY)
        return np.exp(-0.5 * (z / width) ** 2)
    raise PreconditionError(f"Unknown start '{start}' (expected gaussian, uniform or auto)")


def _minimize_local(N: float, trap: TrapSpec, interaction: LocalInteraction,
                    grid: Grid1D) -> Tuple[DensityProfile, EnergyBreakdown]:
    """Exact discrete minimizer without gradient term: rho = f^-1(mu - V)_+."""
    h = grid.spacing
    potential = trap.potential(grid.points)
    floor = float(potential.min())

    def excess_mass(mu: float) -> float:
        return float(trapezoid(interaction.inverse_derivative(mu - potential), dx=h)) - N

    width = 1.0
    while excess_mass(floor + width) < 0:
        width *= 2.0
        if width > 1e300:
            raise ConvergenceError("Could not bracket the chemical potential")
    mu = brentq(excess_mass, floor, floor + width, xtol=1e-15 * width, rtol=4 * np.finfo(float).eps,
                maxiter=500)
    profile = DensityProfile.normalized(grid, interaction.inverse_derivative(mu - potential), N)
    if not trap.is_hard_wall and profile.edge_ratio() > EDGE_DECAY:
        raise DomainTooSmallError(f"Local minimizer reaches the domain edge (mu={mu:.6g})")
    energy = evaluate_energy(profile.values, grid, trap, interaction, kinetic=False)
    return profile, EnergyBreakdown.from_terms(0.0, energy.potential, energy.interaction, float(mu))


def _minimize_gradient_flow(N: float, trap: TrapSpec, interaction: LocalInteraction, grid: Grid1D,
                            tol: float, start: str, max_iter: int,
                            callback: Optional[Callable[[int, float], None]]) -> Tuple[DensityProfile, EnergyBreakdown]:
    h = grid.spacing
    z = grid.points[1:-1]
    potential = trap.potential(z)
    sigma, ground = _dirichlet_lowest(potential, h)
    off = np.full(z.size - 1, -1.0 / h ** 2)
    operator = sparse.diags([off, 2.0 / h ** 2 + potential, off], [-1, 0, 1], format='csc')

    def energy(psi: np.ndarray) -> float:
        rho = psi ** 2
        return float(h * (np.dot(psi, operator @ psi) + np.sum(interaction.density(rho))))

    problem = ConstrainedProblem(
        operator=operator, floor=sigma, weight=h, mass=N, energy=energy,
        frozen=lambda psi: interaction.derivative(psi ** 2),
        slope=lambda psi: 2.0 * interaction.slope(psi ** 2),
        label=f"1D {interaction.name} functional"
    )

    if start == 'auto':
        if interaction.invertible:
            local, _ = _minimize_local(N, trap, interaction, grid)
            psi = np.sqrt(local.values[1:-1]) + 1e-3 * math.sqrt(N / (h * z.size)) * ground / ground.max()
        else:
            psi = ground.copy()
    else:
        psi = _initial_psi(start, z, max(abs(grid.z_min), abs(grid.z_max)))
    psi, _, mu = minimize_constrained(problem, psi, tol, max_iter, callback)
    psi = np.abs(psi)

    values = np.zeros(grid.n_points)
    values[1:-1] = psi ** 2
    profile = DensityProfile.normalized(grid, values, N)
    if not trap.is_hard_wall and profile.edge_ratio() > EDGE_DECAY:
        raise DomainTooSmallError(
            f"Density at the domain edge is {profile.edge_ratio():.3g} of the maximum; enlarge the grid"
        )
    terms = evaluate_energy(profile.values, grid, trap, interaction)
    return profile, EnergyBreakdown.from_terms(terms.kinetic, terms.potential, terms.interaction, mu)


def minimize_general(
    N: float,
    trap: TrapSpec,
    g: float,
    table: Optional[LLEnergyTable],
    grid: Optional[Grid1D] = None,
    tol: float = DEFAULT_TOL,
    *,
    interaction: Optional[LocalInteraction] = None,
    kinetic: bool = True,
    start: str = 'auto',
    max_iter: int = DEFAULT_MAX_ITER,
    callback: Optional[Callable[[int, float], None]] = None
) -> Tuple[DensityProfile, EnergyBreakdown]:
    """Minimize the 1D functional at mass N.

    By default the local term is rho^3 e(g/rho); pass `interaction` to minimize
    a regime functional instead, and `kinetic=False` to drop the gradient term.
    `callback(iteration, energy)` sees every accepted step.
    """
    if not N > 0:
        raise PreconditionError(f"Particle number must be positive, got {N}")
    if g < 0:
        raise PreconditionError(f"Coupling must be non-negative, got {g}")
    if not tol > 0:
        raise PreconditionError(f"Tolerance must be positive, got {tol}")
    interaction = resolve_interaction(g, table, interaction)
    if grid is None:
        grid = auto_grid(N, trap, g, interaction=interaction)
    trap.check_grid(grid)

    if not kinetic:
        return _minimize_local(N, trap, interaction, grid)
    return _minimize_gradient_flow(N, trap, interaction, grid, tol, start, max_iter, callback)


# ---------------------------------------------------------------------------
# Validity of the 1D description
# ---------------------------------------------------------------------------

class ValidityThresholds(BaseModel):
    """Smallness thresholds for the quantities that must be << 1."""
    transverse: float = Field(default=0.1, gt=0)
    thin: float = Field(default=0.1, gt=0)
    elongated: float = Field(default=0.1, gt=0)
    dilute: float = Field(default=0.1, gt=0)


class ValidityRecord(BaseModel):
    rhobar: float
    e0_r2: float
    a_over_r: float
    r_over_L: float
    diluteness: float
    e_source: str
    flags: Dict[str, bool]
    passed: bool


def validity_from_mean_density(params, rhobar: float, table: Optional[LLEnergyTable] = None,
                               thresholds: Optional[ValidityThresholds] = None) -> ValidityRecord:
    """Evaluate the 1D validity quantities at a given mean density.

    Without a table e(t) is replaced by its upper envelope min(t/2, pi^2/3).
    """
    thresholds = thresholds or ValidityThresholds()
    g = params.coupling()
    if rhobar > 0 and g > 0:
        t = g / rhobar
        if table is not None:
            e, _ = table.evaluate(np.array([t]))
            e_value, source = float(e[0]), 'table'
        else:
            e_value, source = min(0.5 * t, STRONG_LIMIT), 'upper-envelope'
    else:
        e_value, source = 0.0, 'table' if table is not None else 'upper-envelope'

    e0_r2 = rhobar ** 2 * e_value * params.r ** 2
    a_over_r = params.a / params.r
    r_over_L = params.r / params.L
    diluteness = params.a ** 2 * g * rhobar
    flags = {
        'transverse_gap': e0_r2 < thresholds.transverse,
        'thin_scattering': a_over_r < thresholds.thin,
        'elongated': r_over_L < thresholds.elongated,
        'dilute': diluteness < thresholds.dilute
    }
    return ValidityRecord(
        rhobar=rhobar, e0_r2=e0_r2, a_over_r=a_over_r, r_over_L=r_over_L,
        diluteness=diluteness, e_source=source, flags=flags, passed=all(flags.values())
    )


def validity_check(params, rho: DensityProfile, table: Optional[LLEnergyTable] = None,
                   thresholds: Optional[ValidityThresholds] = None) -> ValidityRecord:
    """Validity quantities {e0(rho_bar) r^2, a/r, r/L} and diluteness of a solved profile."""
    return validity_from_mean_density(params, mean_density(rho), table, thresholds)
