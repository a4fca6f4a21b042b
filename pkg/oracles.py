"""Independent reference computations and explicit analytic bounds.

Everything here works on the n-boson delta Hamiltonian
H = -sum d^2/dx_i^2 + g sum_{i<j} delta(x_i - x_j) on an interval of length ell.
"""

import csv
import logging
import math
import os
import threading
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import linprog
from scipy.sparse.linalg import eigsh

from errors import ConvergenceError, HypothesisCheckError, MemoryBudgetError, PreconditionError


logger = logging.getLogger(__name__)

BETHE_MAX_N = 64
DEFAULT_MESHES = {2: 128, 3: 40}
DEFAULT_MAX_UNKNOWNS = 300_000
BOUNDARY_CONDITIONS = ('neumann', 'dirichlet', 'periodic')

_THREE_BODY_LOCK = threading.Lock()


# ---------------------------------------------------------------------------
# Bethe ansatz on the ring
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BetheState:
    n: int
    ell: float
    g: float
    quasimomenta: np.ndarray
    quantum_numbers: np.ndarray
    energy: float
    residual: float


def _bethe_residual(k: np.ndarray, quantum: np.ndarray, ell: float, c: float) -> np.ndarray:
    diff = k[:, None] - k[None, :]
    return ell * k - 2.0 * math.pi * quantum + 2.0 * np.arctan(diff / c).sum(axis=1)


def _yang_yang_action(k: np.ndarray, quantum: np.ndarray, ell: float, c: float) -> float:
    diff = (k[:, None] - k[None, :])[np.triu_indices(k.size, 1)]
    theta = 2.0 * (diff * np.arctan(diff / c) - 0.5 * c * np.log1p((diff / c) ** 2))
    return float(0.5 * ell * np.dot(k, k) - 2.0 * math.pi * np.dot(quantum, k) + theta.sum())


def _gaudin_matrix(k: np.ndarray, ell: float, c: float) -> np.ndarray:
    kernel = 2.0 * c / (c ** 2 + (k[:, None] - k[None, :]) ** 2)
    np.fill_diagonal(kernel, 0.0)
    return np.diag(ell + kernel.sum(axis=1)) - kernel


def _newton_bethe(k: np.ndarray, quantum: np.ndarray, ell: float, c: float,
                  tol: float, max_iter: int = 100) -> Optional[np.ndarray]:
    """Damped Newton on the Bethe equations; None if it stalls.

    `tol` is relative to the size of the terms, max(ell |k|, 2 pi |I|). A damped
    step is taken when it lowers the residual or, failing that, when it meets
    the Armijo condition on the convex Yang-Yang action.
    """
    action = _yang_yang_action(k, quantum, ell, c)
    for _ in range(max_iter):
        residual = _bethe_residual(k, quantum, ell, c)
        norm = float(np.max(np.abs(residual)))
        scale = max(1.0, ell * float(np.max(np.abs(k))), 2.0 * math.pi * float(np.max(np.abs(quantum))))
        if norm < tol * scale:
            return k
        step = np.linalg.solve(_gaudin_matrix(k, ell, c), -residual)
        slope = float(np.dot(residual, step))
        damping = 1.0
        while damping > 1e-12:
            trial = k + damping * step
            trial_action = _yang_yang_action(trial, quantum, ell, c)
            if np.max(np.abs(_bethe_residual(trial, quantum, ell, c))) < norm:
                break
            if trial_action <= action + 1e-4 * damping * slope:
                break
            damping *= 0.5
        else:
            return None
        k, action = trial, trial_action
    return None


def bethe_ground_state(n: int, ell: float, g: float, tol: float = 1e-12) -> BetheState:
    """Ground-state quasimomenta of n bosons on a ring of length ell.

    Solves k_j ell = 2 pi I_j - 2 sum_l arctan((k_j - k_l)/c), c = g/2, with
    symmetric consecutive I_j, continuing in log g down from the free-fermion
    limit and halving the step whenever Newton stalls.
    """
    if not 1 <= n <= BETHE_MAX_N:
        raise PreconditionError(f"Bethe solver supports 1 <= n <= {BETHE_MAX_N}, got {n}")
    if not ell > 0 or g < 0:
        raise PreconditionError(f"Need ell > 0 and g >= 0, got ell={ell}, g={g}")
    quantum = np.arange(n) - 0.5 * (n - 1)
    if g == 0 or n == 1:
        k = np.zeros(n)
        return BetheState(n, ell, g, k, quantum, 0.0, 0.0)

    start_g = max(g, 1e4 * n / ell)
    c = 0.5 * start_g
    k = 2.0 * math.pi * quantum / (ell + 2.0 * n / c)
    k = _newton_bethe(k, quantum, ell, c, tol)
    if k is None:
        raise ConvergenceError(f"Bethe equations did not converge at the starting coupling g={start_g:g}")

    current = math.log(start_g)
    target = math.log(g)
    step = 1.0
    while current > target:
        nxt = max(current - step, target)
        solved = _newton_bethe(k, quantum, ell, 0.5 * math.exp(nxt), tol)
        if solved is None:
            step *= 0.5
            if step < 1e-6:
                raise ConvergenceError(f"Bethe continuation stalled at g={math.exp(current):.6g}")
            logger.debug("Bethe continuation: halving step to %.3g at g=%.6g", step, math.exp(current))
            continue
        k, current = solved, nxt

    residual = float(np.max(np.abs(_bethe_residual(k, quantum, ell, 0.5 * g))))
    return BetheState(n, ell, g, k, quantum, float(np.dot(k, k)), residual)


def bethe_energy_density(n: int, t: float) -> float:
    """e_n(t) = E_p ell^2 / n^3 at unit density, i.e. ell = n and g = t."""
    return bethe_ground_state(n, float(n), t).energy / n


# ---------------------------------------------------------------------------
# Few-body grid diagonalization
# ---------------------------------------------------------------------------

def _laplacian_1d(bc: str, mesh: int, ell: float) -> Tuple[sparse.spmatrix, float]:
    """-d^2/dx^2 on `mesh` intervals: Dirichlet nodes, Neumann cells, periodic nodes."""
    h = ell / mesh
    if bc == 'dirichlet':
        size = mesh - 1
    elif bc in ('neumann', 'periodic'):
        size = mesh
    else:
        raise PreconditionError(f"Unknown boundary condition '{bc}' (expected one of {BOUNDARY_CONDITIONS})")
    main = np.full(size, 2.0)
    if bc == 'neumann':
        main[0] = main[-1] = 1.0
    off = -np.ones(size - 1)
    operator = sparse.diags([off, main, off], [-1, 0, 1], format='lil')
    if bc == 'periodic':
        operator[0, size - 1] = -1.0
        operator[size - 1, 0] = -1.0
    return operator.tocsr() / h ** 2, h


def _max_unknowns() -> int:
    return int(os.getenv('GAS1D_FEWBODY_MAX_UNKNOWNS', str(DEFAULT_MAX_UNKNOWNS)))


def _fewbody_lowest(n: int, ell: float, g: float, bc: str, mesh: int) -> float:
    one, h = _laplacian_1d(bc, mesh, ell)
    size = one.shape[0]
    unknowns = size ** n
    if unknowns > _max_unknowns():
        raise MemoryBudgetError(
            f"{n}-body grid with {size} points per axis needs {unknowns} unknowns "
            f"(limit {_max_unknowns()}, set GAS1D_FEWBODY_MAX_UNKNOWNS to raise it)"
        )
    identity = sparse.identity(size, format='csr')
    operator = sparse.csr_matrix((unknowns, unknowns))
    for axis in range(n):
        factors = [one if i == axis else identity for i in range(n)]
        term = factors[0]
        for factor in factors[1:]:
            term = sparse.kron(term, factor, format='csr')
        operator = operator + term

    if g > 0:
        index = np.indices((size,) * n).reshape(n, -1)
        contacts = np.zeros(unknowns)
        for i in range(n):
            for j in range(i + 1, n):
                contacts += index[i] == index[j]
        operator = operator + sparse.diags(g / h * contacts)

    values = eigsh(operator.tocsc(), k=1, sigma=-1.0, which='LM', return_eigenvectors=False)
    return float(values[0])


def grid_fewbody_energy(n: int, ell: float, g: float, bc: str, mesh: Optional[int] = None) -> float:
    """Lowest eigenvalue of the discretized n-body operator, Richardson-extrapolated over mesh and mesh/2.

    The contact is an on-site potential g/h on coincident indices. The ground
    state is positive and therefore symmetric, so no sector projection is
    needed. The extrapolation order is 2 for g = 0 or near hard-core contact
    (g h >= 10) and 1 otherwise.
    """
    if n not in (2, 3):
        raise PreconditionError(f"Grid diagonalization supports n = 2 or 3, got {n}")
    if not ell > 0 or g < 0:
        raise PreconditionError(f"Need ell > 0 and g >= 0, got ell={ell}, g={g}")
    mesh = mesh or DEFAULT_MESHES[n]
    if mesh % 2 or mesh < 8:
        raise PreconditionError(f"Mesh must be an even number of intervals >= 8, got {mesh}")

    def solve() -> Tuple[float, float]:
        return _fewbody_lowest(n, ell, g, bc, mesh), _fewbody_lowest(n, ell, g, bc, mesh // 2)

    if n == 3:
        with _THREE_BODY_LOCK:
            fine, coarse = solve()
    else:
        fine, coarse = solve()

    order = 2 if g == 0 or g * ell / mesh >= 10 else 1
    factor = 2.0 ** order
    return (factor * fine - coarse) / (factor - 1.0)


# ---------------------------------------------------------------------------
# Explicit bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExplicitBound:
    value: Optional[float]
    status: str
    R: float

    @property
    def usable(self) -> bool:
        return self.value is not None


def lower_bound_explicit(n: int, ell: float, g: float) -> ExplicitBound:
    """Fully explicit lower bound on the Neumann energy.

    E >= (1/2) n(n-1)(g/ell)(1 - R - (pi/6 sqrt n) R^{3/2})(1 - R/(1 - R^2)),
    R = n sqrt(ell g) / pi. Outside R < 1 and pi^2/ell^2 > n(n-1)g/ell the
    result is tagged vacuous; a non-positive factor gives the trivial bound 0.
    """
    if n < 1 or not ell > 0 or g < 0:
        raise PreconditionError(f"Need n >= 1, ell > 0, g >= 0, got n={n}, ell={ell}, g={g}")
    R = n * math.sqrt(ell * g) / math.pi
    if g == 0:
        return ExplicitBound(0.0, 'ok', R)
    if R >= 1 or math.pi ** 2 / ell ** 2 <= n * (n - 1) * g / ell:
        logger.warning("Explicit lower bound is vacuous for n=%d ell=%g g=%g (R=%.4g)", n, ell, g, R)
        return ExplicitBound(None, 'vacuous', R)
    first = 1.0 - R - math.pi / (6.0 * math.sqrt(n)) * R ** 1.5
    second = 1.0 - R / (1.0 - R ** 2)
    if first <= 0 or second <= 0:
        return ExplicitBound(0.0, 'trivial', R)
    return ExplicitBound(0.5 * n * (n - 1) * g / ell * first * second, 'ok', R)


def hardcore_upper_bound(n: int, ell: float, R0: float) -> float:
    """(pi^2/3)(n^3/ell^2)(1 + 1/n)(1 + 1/2n) / (1 - (n-1) R0/ell)^2."""
    if n < 1 or not ell > 0 or R0 < 0:
        raise PreconditionError(f"Need n >= 1, ell > 0, R0 >= 0, got n={n}, ell={ell}, R0={R0}")
    if (n - 1) * R0 >= ell:
        raise PreconditionError(f"Hard-core bound needs (n-1) R0 < ell, got (n-1) R0 = {(n - 1) * R0:g}")
    base = math.pi ** 2 / 3.0 * n ** 3 / ell ** 2 * (1.0 + 1.0 / n) * (1.0 + 0.5 / n)
    return base / (1.0 - (n - 1) * R0 / ell) ** 2


def temple_lower_bound(mean_H: float, mean_H2: float, E1: float) -> float:
    """E0 >= <H> - (<H^2> - <H>^2) / (E1 - <H>) for E1 at most the second eigenvalue."""
    if not mean_H < E1:
        raise PreconditionError(f"Temple's inequality needs <H> < E1, got <H>={mean_H}, E1={E1}")
    variance = mean_H2 - mean_H ** 2
    if variance < -1e-12 * max(1.0, mean_H2):
        raise PreconditionError(f"<H^2> = {mean_H2} is below <H>^2 = {mean_H ** 2}")
    return mean_H - max(variance, 0.0) / (E1 - mean_H)


def delta_smearing_floor(A: float, B: float, alpha: float, ell: float, z0: float, mesh: float) -> float:
    """Lowest eigenvalue of -alpha d^2 + A delta(z - z0) - (alpha/B^2) theta(R - |z - z0|), Neumann ends.

    R = B arctan(B A / 2 alpha). Nodes carry lumped mass h (h/2 at the ends);
    the well enters through each dual cell's overlap with [z0 - R, z0 + R] and
    the delta through linear interpolation at z0.
    """
    if not (alpha > 0 and B > 0 and ell > 0 and A >= 0 and mesh > 0):
        raise PreconditionError("Need alpha, B, ell, mesh > 0 and A >= 0")
    R = B * math.atan(B * A / (2.0 * alpha))
    if R > min(z0, ell - z0) + 1e-12:
        raise PreconditionError(f"Smearing radius R={R:.6g} exceeds the distance from z0={z0} to the ends")

    intervals = max(int(round(ell / mesh)), 2)
    h = ell / intervals
    z = np.linspace(0.0, ell, intervals + 1)
    weights = np.full(z.size, h)
    weights[0] = weights[-1] = 0.5 * h

    stiffness_diag = np.full(z.size, 2.0 * alpha / h)
    stiffness_diag[0] = stiffness_diag[-1] = alpha / h
    stiffness_off = np.full(z.size - 1, -alpha / h)

    left = np.maximum(z - 0.5 * h, 0.0)
    right = np.minimum(z + 0.5 * h, ell)
    overlap = np.clip(np.minimum(right, z0 + R) - np.maximum(left, z0 - R), 0.0, None)
    stiffness_diag -= alpha / B ** 2 * overlap

    cell = min(int(z0 // h), intervals - 1)
    theta = z0 / h - cell
    coefficients = (1.0 - theta, theta)
    stiffness_diag[cell] += A * coefficients[0] ** 2
    stiffness_diag[cell + 1] += A * coefficients[1] ** 2
    stiffness_off[cell] += A * coefficients[0] * coefficients[1]

    scale = 1.0 / np.sqrt(weights)
    diagonal = stiffness_diag * scale ** 2
    off = stiffness_off * scale[:-1] * scale[1:]
    values = eigh_tridiagonal(diagonal, off, eigvals_only=True, select='i', select_range=(0, 0))
    return float(values[0])


# ---------------------------------------------------------------------------
# Superadditivity lemma
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuperadditiveResult:
    bound: float
    exhaustive_minimum: float
    lp_minimum: float
    minimizing_partition: Tuple[int, ...]
    holds: bool


def _right_derivative(func: Callable[[float], float], x: float) -> float:
    step = 1e-7 * max(1.0, abs(x))
    return (func(x + step) - func(x)) / step


def _check_superadditive_hypotheses(E: Sequence[float], N: int, M: int, L_func, K_func, lam: float) -> None:
    tol = 1e-9
    if not lam > 1:
        raise HypothesisCheckError('lambda > 1', f"lambda = {lam}")
    if any(value < 0 for value in E):
        raise HypothesisCheckError('E non-negative')
    top = len(E) - 1
    for a in range(top + 1):
        for b in range(top + 1 - a):
            if E[a + b] < E[a] + E[b] - tol * (1.0 + abs(E[a + b])):
                raise HypothesisCheckError('E superadditive', f"E({a + b}) < E({a}) + E({b})")
    for n, value in enumerate(E):
        if value < L_func(n) * K_func(n) - tol * (1.0 + abs(value)):
            raise HypothesisCheckError('E >= L K', f"fails at n = {n}")
    if abs(L_func(0.0)) > tol:
        raise HypothesisCheckError('L(0) = 0', f"L(0) = {L_func(0.0)}")

    xs = np.linspace(0.0, max(float(N), float(top), 1.0), 401)
    ls = np.array([L_func(x) for x in xs])
    if np.any(ls < -tol):
        raise HypothesisCheckError('L non-negative')
    if np.any(ls[:-2] - 2.0 * ls[1:-1] + ls[2:] < -tol * (1.0 + np.abs(ls[1:-1]))):
        raise HypothesisCheckError('L convex')
    for x in xs[1:]:
        if _right_derivative(L_func, x) > L_func(lam * x) / (2.0 * lam * x) + 1e-5 * (1.0 + abs(L_func(lam * x))):
            raise HypothesisCheckError("L'(x) <= L(lambda x) / (2 lambda x)", f"fails at x = {x:.4g}")

    k_top = int(math.ceil(lam * N / M)) + top + 1
    ks = [K_func(k) for k in range(k_top + 1)]
    if any(k < -tol for k in ks) or any(b > a + tol for a, b in zip(ks, ks[1:])):
        raise HypothesisCheckError('K non-negative and decreasing')


def _partitions(total: int, parts: int, largest: int) -> Iterator[Tuple[int, ...]]:
    """Partitions of `total` into at most `parts` positive parts, none above `largest`."""
    if total == 0:
        yield ()
        return
    if parts == 0:
        return
    for first in range(min(total, largest), 0, -1):
        for rest in _partitions(total - first, parts - 1, first):
            yield (first,) + rest


def superadditive_bound(E: Sequence[float], M: int, N: int, L_func: Callable[[float], float],
                        K_func: Callable[[float], float], lam: float) -> SuperadditiveResult:
    """M L(N/M) K(ceil(lambda N/M)) against the exact minimum of sum c_n E(n).

    The minimum is taken exhaustively over integer occupations and by linear
    programming over real c_n >= 0 with sum c_n <= M, sum n c_n = N.
    """
    if M < 1 or N < 0:
        raise PreconditionError(f"Need M >= 1 and N >= 0, got M={M}, N={N}")
    E = [float(value) for value in E]
    if len(E) <= N:
        raise PreconditionError(f"E must be given for n = 0..{N}")
    _check_superadditive_hypotheses(E, N, M, L_func, K_func, lam)

    bound = M * L_func(N / M) * K_func(int(math.ceil(lam * N / M)))

    best, best_partition = math.inf, ()
    for partition in _partitions(N, M, len(E) - 1):
        value = sum(E[n] for n in partition)
        if value < best:
            best, best_partition = value, partition

    sizes = np.arange(len(E))
    lp = linprog(
        c=np.asarray(E), A_ub=np.ones((1, len(E))), b_ub=[M],
        A_eq=sizes[None, :].astype(float), b_eq=[N], bounds=[(0, None)] * len(E), method='highs'
    )
    if not lp.success:
        raise ConvergenceError(f"Linear program for the occupation minimum failed: {lp.message}")
    lp_min = float(lp.fun)

    holds = bound <= min(best, lp_min) + 1e-9 * (1.0 + abs(bound))
    return SuperadditiveResult(bound, best, lp_min, best_partition, holds)


# ---------------------------------------------------------------------------
# Boundary-condition chain
# ---------------------------------------------------------------------------

class BoundsRecord(BaseModel):
    n: int
    ell: float
    g: float
    E_N: float
    E_p: float
    E_D: float
    lower_explicit: Optional[float]
    lower_status: str
    upper_hardcore: float
    dn_gap: float
    dn_gap_scaled: float
    flags: Dict[str, bool]
    ok: bool


CSV_COLUMNS = ['n', 'ell', 'g', 'E_N', 'E_p', 'E_D', 'lower_explicit', 'upper_hardcore', 'ok']


def bc_chain(n: int, ell: float, g: float, mesh: Optional[int] = None) -> BoundsRecord:
    """Neumann, periodic and Dirichlet energies on matched meshes with the explicit bounds.

    The Dirichlet-Neumann gap is reported together with gap ell^2 / n^{7/3}.
    """
    energies = {bc: grid_fewbody_energy(n, ell, g, bc, mesh) for bc in BOUNDARY_CONDITIONS}
    e_n, e_p, e_d = energies['neumann'], energies['periodic'], energies['dirichlet']
    slack = 1e-8 * max(1.0, e_d)
    lower = lower_bound_explicit(n, ell, g)
    upper = hardcore_upper_bound(n, ell, 0.0)

    flags = {
        'neumann_le_periodic': e_n <= e_p + slack,
        'periodic_le_dirichlet': e_p <= e_d + slack,
        'dirichlet_le_hardcore': e_d <= upper + slack
    }
    if lower.usable:
        flags['lower_le_neumann'] = lower.value <= e_n + slack

    gap = e_d - e_n
    record = BoundsRecord(
        n=n, ell=ell, g=g, E_N=e_n, E_p=e_p, E_D=e_d,
        lower_explicit=lower.value, lower_status=lower.status, upper_hardcore=upper,
        dn_gap=gap, dn_gap_scaled=gap * ell ** 2 / n ** (7.0 / 3.0),
        flags=flags, ok=all(flags.values())
    )
    if not record.ok:
        logger.warning("Boundary-condition chain failed for n=%d ell=%g g=%g: %s", n, ell, g,
                       [name for name, passed in flags.items() if not passed])
    return record


def write_bounds_csv(records: Sequence[BoundsRecord], path: str) -> None:
    """Write records with the columns n,ell,g,E_N,E_p,E_D,lower_explicit,upper_hardcore,ok."""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for record in records:
            row = record.model_dump()
            writer.writerow([
                '' if row[column] is None else (repr(row[column]) if isinstance(row[column], float) else row[column])
                for column in CSV_COLUMNS
            ])
