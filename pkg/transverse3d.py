"""Transverse modes, the effective coupling, and the 3D GP crossover check.

Radial problems live on a cell-centred grid x_i = (i + 1/2) h in units of
the transverse length r, with a Dirichlet wall at the outer face x = n h.
The flux form -(1/x)(x u')' has zero flux through the origin face, so
regularity at x = 0 needs no ghost value. With M = diag(x_i h) the operator
is similar to a symmetric tridiagonal matrix, which is what gets diagonalized.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import sparse
from scipy.linalg import eigh_tridiagonal

from errors import DomainTooSmallError, GridResolutionError, PreconditionError
from functional import (
    DEFAULT_MAX_ITER,
    EDGE_DECAY,
    ConstrainedProblem,
    Grid1D,
    MeanFieldInteraction,
    NoInteraction,
    TrapSpec,
    auto_grid,
    minimize_constrained,
    minimize_general,
)
from oracles import temple_lower_bound


logger = logging.getLogger(__name__)

TransverseKind = Literal['harmonic', 'hard-wall-disk']

MIN_CELLS_PER_R = 8
GP3D_RADIAL_CELLS = 100
GP3D_RADIAL_EXTENT = 5.0
GP3D_Z_POINTS = 241


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centred radial grid in units of r."""
    n_cells: int
    outer_radius: float

    def __post_init__(self):
        if self.n_cells < 16:
            raise PreconditionError(f"Radial grid needs at least 16 cells, got {self.n_cells}")
        if not self.outer_radius > 0:
            raise PreconditionError(f"Outer radius must be positive, got {self.outer_radius}")

    @property
    def spacing(self) -> float:
        return self.outer_radius / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.spacing

    @property
    def cell_areas(self) -> np.ndarray:
        """2 pi x_i h, the quadrature weight of each annulus."""
        return 2.0 * math.pi * self.centers * self.spacing

    def coarsened(self) -> 'RadialGrid':
        if self.n_cells % 2:
            raise PreconditionError("Only grids with an even number of cells can be coarsened")
        return RadialGrid(self.n_cells // 2, self.outer_radius)


DEFAULT_GRIDS = {
    'harmonic': RadialGrid(1600, 8.0),
    'hard-wall-disk': RadialGrid(800, 1.0)
}


def _transverse_potential(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == 'harmonic':
        return x ** 2
    if kind == 'hard-wall-disk':
        return np.zeros_like(x)
    raise PreconditionError(f"Unknown transverse kind '{kind}' (expected harmonic or hard-wall-disk)")


def _check_grid(kind: str, grid: RadialGrid) -> None:
    if kind == 'hard-wall-disk' and not math.isclose(grid.outer_radius, 1.0):
        raise PreconditionError("The hard-wall disk has unit radius; use outer_radius = 1")


def _radial_operator(kind: str, grid: RadialGrid, m: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the symmetrized radial operator."""
    h = grid.spacing
    x = grid.centers
    faces = (np.arange(grid.n_cells + 1)) * h
    inner = faces[:-1]
    outer = faces[1:].copy()
    stiffness_outer = outer.copy()
    stiffness_outer[-1] = 2.0 * outer[-1]
    mass = x * h
    diagonal = (inner + stiffness_outer) / h / mass + _transverse_potential(kind, x)
    if m:
        diagonal = diagonal + m ** 2 / x ** 2
    off = -outer[:-1] / h / np.sqrt(mass[:-1] * mass[1:])
    return diagonal, off


def radial_eigenpairs(kind: TransverseKind, grid: Optional[RadialGrid] = None, m: int = 0,
                      k: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """Lowest k eigenpairs of -Delta + V at angular momentum m.

    Returns eigenvalues and radial profiles u with sum u^2 2 pi x h = 1.
    """
    grid = grid or DEFAULT_GRIDS[kind]
    _check_grid(kind, grid)
    if m < 0 or k < 1:
        raise PreconditionError(f"Need m >= 0 and k >= 1, got m={m}, k={k}")
    diagonal, off = _radial_operator(kind, grid, m)
    values, vectors = eigh_tridiagonal(diagonal, off, select='i', select_range=(0, k - 1))
    profiles = vectors / np.sqrt(grid.cell_areas)[:, None]
    signs = np.sign(profiles[np.argmax(np.abs(profiles), axis=0), np.arange(k)])
    return values, profiles * signs


def _mode_on(kind: str, grid: RadialGrid) -> Tuple[float, float, float, np.ndarray]:
    m0, profiles = radial_eigenpairs(kind, grid, m=0, k=2)
    m1, _ = radial_eigenpairs(kind, grid, m=1, k=1)
    b = np.abs(profiles[:, 0])
    b4 = float(np.sum(b ** 4 * grid.cell_areas))
    gap = min(m0[1], m1[0]) - m0[0]
    return float(m0[0]), float(gap), b4, b


@dataclass(frozen=True, eq=False)
class TransverseMode:
    kind: str
    e_perp: float
    gap: float
    b4_integral: float
    grid: RadialGrid
    b_profile: np.ndarray

    @property
    def sup_norm(self) -> float:
        return float(self.b_profile.max())

    def normalization(self) -> float:
        return float(np.sum(self.b_profile ** 2 * self.grid.cell_areas))


@lru_cache(maxsize=8)
def transverse_ground_state(kind: TransverseKind = 'harmonic', grid: Optional[RadialGrid] = None,
                            extrapolate: bool = True) -> TransverseMode:
    """Ground energy, gap and int |b|^4 of -Delta + V_perp.

    Values are Richardson-extrapolated in h^2 unless `extrapolate` is False,
    in which case they are the grid values consistent with `b_profile`.
    """
    grid = grid or DEFAULT_GRIDS[kind]
    e_fine, gap_fine, b4_fine, b = _mode_on(kind, grid)
    b.setflags(write=False)
    if not extrapolate:
        return TransverseMode(kind, e_fine, gap_fine, b4_fine, grid, b)
    e_coarse, gap_coarse, b4_coarse, _ = _mode_on(kind, grid.coarsened())
    if abs(e_fine - e_coarse) > 1e-2 * abs(e_fine):
        raise GridResolutionError(
            f"Transverse energy moves from {e_coarse:.8g} to {e_fine:.8g} under refinement; use more cells"
        )
    return TransverseMode(
        kind=kind,
        e_perp=(4.0 * e_fine - e_coarse) / 3.0,
        gap=(4.0 * gap_fine - gap_coarse) / 3.0,
        b4_integral=(4.0 * b4_fine - b4_coarse) / 3.0,
        grid=grid,
        b_profile=b
    )


def effective_g(a: float, r: float, mode: TransverseMode) -> float:
    """g = (8 pi a / r^2) int |b|^4."""
    if a < 0 or not r > 0:
        raise PreconditionError(f"Need a >= 0 and r > 0, got a={a}, r={r}")
    return 8.0 * math.pi * a / r ** 2 * mode.b4_integral


# ---------------------------------------------------------------------------
# Auxiliary 2D functional
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: RadialGrid
    values: np.ndarray

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())


def minimize_aux_2d(p: float, grid: Optional[RadialGrid] = None, kind: TransverseKind = 'harmonic',
                    tol: float = 1e-10, max_iter: int = DEFAULT_MAX_ITER) -> Tuple[float, RadialProfile]:
    """Minimize int |grad phi|^2 + V_perp |phi|^2 + p |phi|^4 over unit-norm radial phi."""
    if p < 0:
        raise PreconditionError(f"Auxiliary coupling must be non-negative, got {p}")
    if grid is None:
        grid = DEFAULT_GRIDS[kind]
    _check_grid(kind, grid)
    diagonal, off = _radial_operator(kind, grid)
    values, vectors = eigh_tridiagonal(diagonal, off, select='i', select_range=(0, 0))
    areas = grid.cell_areas
    operator = sparse.diags([off, diagonal, off], [-1, 0, 1], format='csc')

    def energy(w: np.ndarray) -> float:
        return float(np.dot(w, operator @ w) + p * np.sum(w ** 4 / areas))

    problem = ConstrainedProblem(
        operator=operator, floor=float(values[0]), weight=1.0, mass=1.0, energy=energy,
        frozen=lambda w: 2.0 * p * w ** 2 / areas,
        slope=lambda w: 4.0 * p * w ** 2 / areas,
        label=f"Auxiliary functional at p={p:g}"
    )
    v, current, _ = minimize_constrained(problem, np.abs(vectors[:, 0]), tol, max_iter)
    return current, RadialProfile(grid, np.abs(v) / np.sqrt(areas))


def aux_energy_bounds(p: float, mode: TransverseMode) -> Tuple[float, float]:
    """Lower and upper bounds on E^aux(p) from the trial state b and the gap.

    The lower bound is only meaningful while gap > 2 p ||b||_inf^2; otherwise -inf.
    """
    upper = mode.e_perp + p * mode.b4_integral
    sup2 = mode.sup_norm ** 2
    denominator = mode.gap - 2.0 * p * sup2
    if denominator <= 0:
        return -math.inf, upper
    lower = mode.e_perp + p * mode.b4_integral * (1.0 - 4.0 * p * sup2 / denominator)
    return lower, upper


# ---------------------------------------------------------------------------
# Radially symmetric 3D GP functional
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Field2D:
    """Phi(rho_perp, z) on radial cell centres times interior z nodes."""
    rho_perp: np.ndarray
    z: np.ndarray
    values: np.ndarray
    cell_areas: np.ndarray
    dz: float
    grid_energy: float

    def mass(self) -> float:
        return float(np.sum(self.values ** 2 * self.cell_areas[:, None]) * self.dz)

    def to_csv(self, path: str) -> None:
        rr, zz = np.meshgrid(self.rho_perp, self.z, indexing='ij')
        table = np.column_stack([rr.ravel(), zz.ravel(), self.values.ravel()])
        np.savetxt(path, table, delimiter=',', header='rho_perp,z,phi', comments='', fmt='%.17g')


class _GP3DProblem:
    """Discrete 3D GP energy in the variable v = sqrt(2 pi x h) r Phi."""

    def __init__(self, N: float, L: float, r: float, a: float, radial: RadialGrid, z_grid: Grid1D):
        self.N, self.r, self.a = N, r, a
        self.radial = radial
        self.z_grid = z_grid
        self.hz = z_grid.spacing
        self.nr, self.nz = radial.n_cells, z_grid.n_points - 2

        diagonal, off = _radial_operator('harmonic', radial)
        self.radial_diag = diagonal / r ** 2
        self.radial_off = off / r ** 2
        self.radial_floor = float(eigh_tridiagonal(diagonal, off, select='i', select_range=(0, 0))[0][0]) / r ** 2

        z = z_grid.points[1:-1]
        self.long_diag = 2.0 / self.hz ** 2 + TrapSpec(2.0, L).potential(z)
        self.long_off = np.full(self.nz - 1, -1.0 / self.hz ** 2)
        self.long_floor = float(eigh_tridiagonal(self.long_diag, self.long_off,
                                                 select='i', select_range=(0, 0))[0][0])
        self.areas = radial.cell_areas * r ** 2

        radial_op = sparse.diags([self.radial_off, self.radial_diag, self.radial_off], [-1, 0, 1])
        long_op = sparse.diags([self.long_off, self.long_diag, self.long_off], [-1, 0, 1])
        self.linear = (sparse.kron(radial_op, sparse.identity(self.nz))
                       + sparse.kron(sparse.identity(self.nr), long_op)).tocsc()
        self.sigma = self.radial_floor + self.long_floor

    def density(self, v: np.ndarray) -> np.ndarray:
        """|Phi|^2 flattened like v."""
        return v ** 2 / np.repeat(self.areas, self.nz)

    def normalize(self, v: np.ndarray) -> np.ndarray:
        return v * math.sqrt(self.N / (self.hz * np.dot(v, v)))

    def energy(self, v: np.ndarray) -> float:
        quartic = 4.0 * math.pi * self.a * np.dot(self.density(v), v ** 2)
        return float(self.hz * (np.dot(v, self.linear @ v) + quartic))

    def frozen(self, v: np.ndarray) -> np.ndarray:
        return 8.0 * math.pi * self.a * self.density(v)

    def product_state(self, b: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """v for Phi = b(x)/r * phi(z) with b on the grid's cells."""
        return self.normalize(np.outer(np.sqrt(self.areas) * b / self.r, phi).ravel())


def _minimize_3d(problem: _GP3DProblem, start: np.ndarray, tol: float, max_iter: int) -> Tuple[float, np.ndarray]:
    flow = ConstrainedProblem(
        operator=problem.linear, floor=problem.sigma, weight=problem.hz, mass=problem.N,
        energy=problem.energy, frozen=problem.frozen,
        slope=lambda v: 2.0 * problem.frozen(v),
        label='3D GP functional'
    )
    v, energy, _ = minimize_constrained(flow, start, tol, max_iter)
    return energy, np.abs(v)


def _gp3d_grids(N: float, L: float, r: float, a: float, radial: Optional[RadialGrid],
                z_grid: Optional[Grid1D]) -> Tuple[RadialGrid, Grid1D, float]:
    radial = radial or RadialGrid(GP3D_RADIAL_CELLS, GP3D_RADIAL_EXTENT)
    if radial.n_cells / radial.outer_radius < MIN_CELLS_PER_R:
        raise GridResolutionError(
            f"Radial grid resolves r with {radial.n_cells / radial.outer_radius:.3g} cells; need {MIN_CELLS_PER_R}"
        )
    g = 8.0 * math.pi * a / r ** 2 * float(np.sum(_mode_on('harmonic', radial)[3] ** 4 * radial.cell_areas))
    if z_grid is None:
        interaction = MeanFieldInteraction(g) if g > 0 else NoInteraction()
        z_grid = auto_grid(N, TrapSpec(2.0, L), g, GP3D_Z_POINTS, interaction)
    return radial, z_grid, g


def _gp1d_on(N: float, L: float, g: float, z_grid: Grid1D, tol: float):
    interaction = MeanFieldInteraction(g) if g > 0 else NoInteraction()
    return minimize_general(N, TrapSpec(2.0, L), g, None, z_grid, tol, interaction=interaction)


def _solve_gp3d_on(N: float, L: float, r: float, a: float, radial: RadialGrid, z_grid: Grid1D,
                   tol: float, max_iter: int) -> Tuple[float, np.ndarray, _GP3DProblem, float]:
    problem = _GP3DProblem(N, L, r, a, radial, z_grid)
    e_grid, _, b4_grid, b = _mode_on('harmonic', radial)
    g_grid = 8.0 * math.pi * a / r ** 2 * b4_grid
    profile, _ = _gp1d_on(N, L, g_grid, z_grid, tol)
    start = problem.product_state(b, np.sqrt(profile.values[1:-1]))
    energy, v = _minimize_3d(problem, start, tol, max_iter)
    return energy, v, problem, g_grid


def minimize_gp_3d(N: float, L: float, r: float, a: float, radial: Optional[RadialGrid] = None,
                   z_grid: Optional[Grid1D] = None, tol: float = 1e-9,
                   max_iter: int = DEFAULT_MAX_ITER) -> Tuple[float, Field2D]:
    """Minimize the radially symmetric 3D GP functional with harmonic V_perp and V_L = (z/L)^2/L^2.

    The radial grid is in units of r and the returned energy is extrapolated in
    its spacing; the field carries the fine-grid energy.
    """
    if not (N > 0 and L > 0 and r > 0 and a >= 0):
        raise PreconditionError(f"Need N, L, r > 0 and a >= 0, got N={N}, L={L}, r={r}, a={a}")
    radial, z_grid, _ = _gp3d_grids(N, L, r, a, radial, z_grid)
    fine, v, problem, _ = _solve_gp3d_on(N, L, r, a, radial, z_grid, tol, max_iter)
    coarse, _, _, _ = _solve_gp3d_on(N, L, r, a, radial.coarsened(), z_grid, tol, max_iter)

    phi = np.sqrt(problem.density(v)).reshape(problem.nr, problem.nz)
    edge = max(phi[:, 0].max(), phi[:, -1].max(), phi[-1, :].max())
    if edge ** 2 > EDGE_DECAY * phi.max() ** 2:
        raise DomainTooSmallError("3D GP density reaches the edge of the computational box")
    field = Field2D(
        rho_perp=radial.centers * r, z=z_grid.points[1:-1], values=phi,
        cell_areas=problem.areas, dz=problem.hz, grid_energy=fine
    )
    return (4.0 * fine - coarse) / 3.0, field


# ---------------------------------------------------------------------------
# Crossover ratio
# ---------------------------------------------------------------------------

class CrossoverResult(BaseModel):
    r: float
    a: float
    g: float
    ratio: float
    numerator: float
    denominator: float
    e_perp_grid: float
    upper_bound_holds: bool
    temple_estimate: Optional[float] = None


def temple_crossover_bound(problem: _GP3DProblem, trial: np.ndarray, e_perp_grid: float,
                           gap_grid: float) -> float:
    """Temple estimate of E^GP_3D from the product trial state.

    Uses the mean-field Hamiltonian frozen at the trial density, the lowest
    excited transverse level e_perp + gap, and converts the resulting
    eigenvalue estimate to an energy by removing half the quartic term.
    """
    frozen = problem.frozen(trial)
    hv = problem.linear @ trial + frozen * trial
    norm2 = np.dot(trial, trial)
    mean_h = float(np.dot(trial, hv) / norm2)
    mean_h2 = float(np.dot(hv, hv) / norm2)
    excited = (e_perp_grid + gap_grid) / problem.r ** 2 + problem.long_floor
    eigenvalue = temple_lower_bound(mean_h, mean_h2, excited)
    quartic = 4.0 * math.pi * problem.a * problem.hz * np.dot(problem.density(trial), trial ** 2)
    return problem.N * eigenvalue - float(quartic)


def crossover_ratio(r: float, a: float, radial: Optional[RadialGrid] = None, z_grid: Optional[Grid1D] = None,
                    tol: float = 1e-9) -> CrossoverResult:
    """(E^GP_3D(1,1,r,a) - e_perp/r^2) / E^GP(1,1,g) on one shared discretization.

    Numerator and denominator use the grid values of e_perp, int b^4 and the
    1D GP energy on the same z grid, so the trial state b (x) phi^GP makes the
    upper bound an exact statement about the discrete problems.
    """
    radial, z_grid, _ = _gp3d_grids(1.0, 1.0, r, a, radial, z_grid)
    energy, v, problem, g_grid = _solve_gp3d_on(1.0, 1.0, r, a, radial, z_grid, tol, DEFAULT_MAX_ITER)
    e_grid, gap_grid, _, b = _mode_on('harmonic', radial)
    profile, gp = _gp1d_on(1.0, 1.0, g_grid, z_grid, tol)

    numerator = energy - e_grid / r ** 2
    denominator = gp.total
    trial = problem.product_state(b, np.sqrt(profile.values[1:-1]))
    temple = temple_crossover_bound(problem, trial, e_grid, gap_grid)
    holds = numerator <= denominator + 1e-9 * (abs(denominator) + e_grid / r ** 2)
    logger.info("Crossover r=%g a=%g: ratio %.8f (upper bound %s)", r, a, numerator / denominator,
                'holds' if holds else 'violated')
    return CrossoverResult(
        r=r, a=a, g=g_grid, ratio=numerator / denominator, numerator=numerator, denominator=denominator,
        e_perp_grid=e_grid, upper_bound_holds=holds, temple_estimate=temple
    )
