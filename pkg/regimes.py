"""Regime-limit functionals, their reduced minimizers, and the Region 1-5 classifier.

Every regime solver works on the reduced problem (unit mass, unit trap
length) and scales back with the corresponding exact scaling relation:

    ideal   E = N e_par / L^2                        profile scale L
    GP      E = (N/L^2) E^GP(1,1,NgL)                profile scale L
    TF      E = (N/L^2)(NgL)^{s/(s+1)} E^TF(1,1,1)   profile scale Lbar_TF
    LL      E = N gamma^2 E^LL(1,1,g/gamma)          profile scale Lbar_LL
    GT      E = N gamma^2 E^GT(1,1)                  profile scale Lbar_LL

For a hard wall (s = inf) the exponents take their limits: the box half-width
is the profile scale everywhere and gamma = N/L.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_serializer, field_validator, model_validator
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import roots_legendre

from errors import ConvergenceError, PreconditionError
from functional import (
    DEFAULT_TOL,
    HARD_WALL,
    DensityProfile,
    EnergyBreakdown,
    Grid1D,
    LiebLinigerInteraction,
    MeanFieldInteraction,
    NoInteraction,
    TrapSpec,
    ValidityRecord,
    ValidityThresholds,
    longitudinal_ground_state,
    mean_density,
    minimize_general,
    validity_from_mean_density,
)
from ll_core import STRONG_LIMIT, LLEnergyTable


logger = logging.getLogger(__name__)

REGION_LABELS = {
    1: 'ideal-gas',
    2: '1d-gp',
    3: '1d-tf',
    4: 'lieb-liniger',
    5: 'girardeau-tonks'
}
REGION4_NOTE = "Region 4 window theta3 <= g/gamma <= theta4 is a convention; the raw coordinates are reported"
PROFILE_POINTS = 4097
SUPPORT_MARGIN = 1.25


# ---------------------------------------------------------------------------
# Parameters, thresholds, reports
# ---------------------------------------------------------------------------

class GasParams(BaseModel):
    """Physical inputs in solver units (hbar = 2m = 1)."""
    N: float = Field(ge=1)
    L: float = Field(gt=0)
    r: float = Field(gt=0)
    a: float = Field(ge=0)
    s: Union[float, Literal['hard-wall']] = 2.0
    transverse_kind: Literal['harmonic', 'hard-wall-disk'] = 'harmonic'

    @field_validator('s', mode='before')
    @classmethod
    def parse_exponent(cls, value):
        if isinstance(value, str):
            if value != 'hard-wall':
                raise ValueError(f"Unknown trap exponent '{value}' (use a number or 'hard-wall')")
            return HARD_WALL
        if value is None or not value > 0:
            raise ValueError(f"Trap exponent must be positive, got {value}")
        return float(value)

    @field_serializer('s')
    def serialize_exponent(self, value: float):
        return 'hard-wall' if math.isinf(value) else value

    @model_validator(mode='after')
    def warn_wide_scattering(self) -> 'GasParams':
        if self.a >= self.r:
            logger.warning("Scattering length a=%g is not smaller than r=%g; regime formulas lose meaning",
                           self.a, self.r)
        return self

    @property
    def is_hard_wall(self) -> bool:
        return math.isinf(self.s)

    def trap(self) -> TrapSpec:
        return TrapSpec(self.s, self.L)

    def coupling(self) -> float:
        """Effective 1D coupling g = (8 pi a / r^2) int |b|^4."""
        from transverse3d import effective_g, transverse_ground_state

        return effective_g(self.a, self.r, transverse_ground_state(self.transverse_kind))


class RegimeThresholds(BaseModel):
    theta1: float = Field(default=0.1, gt=0)
    theta2: float = Field(default=10.0, gt=0)
    theta3: float = Field(default=0.1, gt=0)
    theta4: float = Field(default=10.0, gt=0)

    @model_validator(mode='after')
    def check_order(self) -> 'RegimeThresholds':
        if self.theta1 > self.theta2 or self.theta3 > self.theta4:
            raise ValueError("Thresholds must satisfy theta1 <= theta2 and theta3 <= theta4")
        return self


class RegimeReport(BaseModel):
    g: float
    gamma: float
    NgL: float
    g_over_gamma: float
    g_over_rhobar: float
    Lbar_TF: float
    Lbar_LL: float
    region: int = Field(ge=1, le=5)
    label: str
    rhobar: float
    rhobar_self_consistent: Optional[float] = None
    validity: ValidityRecord
    note: str = REGION4_NOTE


def _exponents(s: float) -> Tuple[float, float, float]:
    """(s/(s+2), 1/(s+1), s/(s+1)) with their hard-wall limits."""
    if math.isinf(s):
        return 1.0, 0.0, 1.0
    return s / (s + 2.0), 1.0 / (s + 1.0), s / (s + 1.0)


def density_parameter(N: float, L: float, s: float) -> float:
    """gamma = (N/L) N^{-2/(s+2)}."""
    return N ** _exponents(s)[0] / L


def region_length_scales(N: float, L: float, g: float, s: float) -> Dict[str, float]:
    """NgL, gamma and the TF / LL extents Lbar_TF = L (NgL)^{1/(s+1)}, Lbar_LL = L N^{2/(s+2)}."""
    gamma_exp, tf_exp, _ = _exponents(s)
    ngl = N * g * L
    return {
        'NgL': ngl,
        'gamma': N ** gamma_exp / L,
        'Lbar_TF': L * ngl ** tf_exp if ngl > 0 else 0.0,
        'Lbar_LL': L * N ** (1.0 - gamma_exp)
    }


def _region_of(ngl: float, g_over_gamma: float, thresholds: RegimeThresholds) -> int:
    if ngl < thresholds.theta1:
        return 1
    if ngl <= thresholds.theta2:
        return 2
    if g_over_gamma < thresholds.theta3:
        return 3
    if g_over_gamma <= thresholds.theta4:
        return 4
    return 5


def classify(params: GasParams, thresholds: Optional[RegimeThresholds] = None,
             table: Optional[LLEnergyTable] = None,
             validity_thresholds: Optional[ValidityThresholds] = None) -> RegimeReport:
    """Place a parameter set in Regions 1-5 from NgL and g/gamma.

    rho_bar follows the regional scaling: N/L in Regions 1-2,
    (N/L)(NgL)^{-1/(s+1)} in Region 3, gamma in Regions 4-5.
    """
    thresholds = thresholds or RegimeThresholds()
    g = params.coupling()
    scales = region_length_scales(params.N, params.L, g, params.s)
    gamma = scales['gamma']
    ngl = scales['NgL']
    region = _region_of(ngl, g / gamma, thresholds)

    if region <= 2:
        rhobar = params.N / params.L
    elif region == 3:
        rhobar = (params.N / params.L) * ngl ** (-_exponents(params.s)[1])
    else:
        rhobar = gamma

    validity = validity_from_mean_density(params, rhobar, table, validity_thresholds)
    logger.debug("Classified N=%g L=%g g=%g into region %d", params.N, params.L, g, region)
    return RegimeReport(
        g=g, gamma=gamma, NgL=ngl, g_over_gamma=g / gamma, g_over_rhobar=g / rhobar,
        Lbar_TF=scales['Lbar_TF'], Lbar_LL=scales['Lbar_LL'],
        region=region, label=REGION_LABELS[region], rhobar=rhobar, validity=validity
    )


def attach_self_consistent(report: RegimeReport, profile: DensityProfile) -> RegimeReport:
    """Copy of the report carrying the rho_bar of a solved minimizer."""
    return report.model_copy(update={'rhobar_self_consistent': mean_density(profile)})


# ---------------------------------------------------------------------------
# Reduced closed-form profiles
# ---------------------------------------------------------------------------

def _support_edge(mu: float, s: float) -> float:
    return 1.0 if math.isinf(s) else mu ** (1.0 / s)


def _half_line_integral(func, edge: float) -> float:
    value, _ = quad(func, 0.0, edge, limit=200, epsabs=1e-14, epsrel=1e-13)
    return 2.0 * value


def _solve_unit_mass(mass_of_mu) -> float:
    """Root of mass(mu) = 1 for an increasing mass(mu) with mass(0) = 0."""
    hi = 1.0
    for _ in range(200):
        if mass_of_mu(hi) > 1.0:
            break
        hi *= 2.0
    else:
        raise ConvergenceError("Could not bracket the chemical potential; check the trap exponent")
    return brentq(lambda mu: mass_of_mu(mu) - 1.0, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _sample_profile(shape, mu: float, s: float, grid: Optional[Grid1D]) -> DensityProfile:
    if grid is None:
        if math.isinf(s):
            grid = Grid1D(-1.0, 1.0, PROFILE_POINTS)
        else:
            grid = Grid1D.symmetric(SUPPORT_MARGIN * _support_edge(mu, s), PROFILE_POINTS)
    potential = TrapSpec(s, 1.0).potential(grid.points)
    return DensityProfile.normalized(grid, shape(np.maximum(mu - potential, 0.0)), 1.0)


def _scale_profile(profile: DensityProfile, N: float, length: float) -> DensityProfile:
    """rho(z) = (N/length) rho_1(z/length)."""
    return DensityProfile(profile.grid.scaled(length), profile.values * (N / length), N)


def _reduced_tf(s: float, grid: Optional[Grid1D]) -> Tuple[float, DensityProfile, float]:
    if math.isinf(s):
        mu = 0.5
        energy = 0.25
    else:
        mu = _solve_unit_mass(lambda m: _half_line_integral(lambda x: m - x ** s, _support_edge(m, s)))
        energy = _half_line_integral(
            lambda x: x ** s * (mu - x ** s) + 0.5 * (mu - x ** s) ** 2, _support_edge(mu, s)
        )
    return energy, _sample_profile(lambda y: y, mu, s, grid), mu


def _reduced_gt(s: float, grid: Optional[Grid1D]) -> Tuple[float, DensityProfile, float]:
    shape = lambda y: np.sqrt(y) / math.pi
    if math.isinf(s):
        mu = math.pi ** 2 / 4.0
        energy = math.pi ** 2 / 12.0
    else:
        mu = _solve_unit_mass(
            lambda m: _half_line_integral(lambda x: math.sqrt(max(m - x ** s, 0.0)) / math.pi, _support_edge(m, s))
        )

        def integrand(x):
            rho = math.sqrt(max(mu - x ** s, 0.0)) / math.pi
            return x ** s * rho + STRONG_LIMIT * rho ** 3

        energy = _half_line_integral(integrand, _support_edge(mu, s))
    return energy, _sample_profile(shape, mu, s, grid), mu


# ---------------------------------------------------------------------------
# Regime solvers
# ---------------------------------------------------------------------------

def solve_ideal(N: float, L: float, s: float = 2.0) -> Tuple[float, DensityProfile]:
    """E = N e_par / L^2 and rho(z) = (N/L) rho_par(z/L)."""
    e_par, rho_par = longitudinal_ground_state(TrapSpec(s, 1.0))
    return N * e_par / L ** 2, _scale_profile(rho_par, N, L)


def solve_gp_1d(N: float, L: float, g: float, s: float = 2.0, grid: Optional[Grid1D] = None,
                tol: float = DEFAULT_TOL) -> Tuple[EnergyBreakdown, DensityProfile]:
    """1D GP functional via the reduced problem at coupling NgL.

    `grid`, when given, is in reduced units z/L.
    """
    if g < 0:
        raise PreconditionError(f"Coupling must be non-negative, got {g}")
    ngl = N * g * L
    interaction = MeanFieldInteraction(ngl) if ngl > 0 else NoInteraction()
    profile, breakdown = minimize_general(1.0, TrapSpec(s, 1.0), ngl, None, grid, tol, interaction=interaction)
    return breakdown.scaled(N / L ** 2, 1.0 / L ** 2), _scale_profile(profile, N, L)


def solve_tf(N: float, L: float, g: float, s: float = 2.0,
             grid: Optional[Grid1D] = None) -> Tuple[float, DensityProfile, float]:
    """Thomas-Fermi minimizer rho = [mu - V]_+ / g, scaled from (1,1,1).

    `grid`, when given, is in units of Lbar_TF.
    """
    if not g > 0:
        raise PreconditionError(f"Thomas-Fermi needs g > 0, got {g}")
    energy1, profile1, mu1 = _reduced_tf(s, grid)
    _, tf_exp, energy_exp = _exponents(s)
    ngl = N * g * L
    factor = ngl ** energy_exp / L ** 2
    length = L * ngl ** tf_exp
    return N * factor * energy1, _scale_profile(profile1, N, length), factor * mu1


def solve_gt(N: float, L: float, s: float = 2.0,
             grid: Optional[Grid1D] = None) -> Tuple[float, DensityProfile, float]:
    """Girardeau-Tonks minimizer rho = [mu - V]_+^{1/2} / pi, scaled from (1,1).

    `grid`, when given, is in units of Lbar_LL.
    """
    energy1, profile1, mu1 = _reduced_gt(s, grid)
    gamma = density_parameter(N, L, s)
    return N * gamma ** 2 * energy1, _scale_profile(profile1, N, N / gamma), gamma ** 2 * mu1


class _ReducedLL:
    """Gradient-free LL functional at unit mass and trap length, coupling t = g/gamma.

    Mass and energy integrals use Gauss-Legendre nodes under x = R(1 - w^2),
    which smooths the density edge at the support boundary R.
    """

    def __init__(self, t: float, s: float, table: LLEnergyTable, order: int = 400):
        self.interaction = LiebLinigerInteraction(t, table)
        self.s = s
        nodes, weights = roots_legendre(order)
        self.w = 0.5 * (nodes + 1.0)
        self.weights = 0.5 * weights

    def _integrate(self, mu: float, integrand) -> float:
        edge = _support_edge(mu, self.s)
        x = edge * (1.0 - self.w ** 2)
        rho = self.interaction.inverse_derivative(mu - x ** self.s)
        return 2.0 * float(np.sum(self.weights * 2.0 * edge * self.w * integrand(x, rho)))

    def mass(self, mu: float) -> float:
        return self._integrate(mu, lambda x, rho: rho)


def solve_ll_functional(N: float, L: float, g: float, s: float, table: LLEnergyTable,
                        grid: Optional[Grid1D] = None) -> Tuple[EnergyBreakdown, DensityProfile]:
    """LL functional without gradient term, rho = f^{-1}(mu - V)_+.

    Scaled from the reduced problem at t = g/gamma. `grid`, when given, is in
    units of Lbar_LL.
    """
    if not g > 0:
        raise PreconditionError(f"Lieb-Liniger functional needs g > 0, got {g}")
    gamma = density_parameter(N, L, s)
    t = g / gamma
    reduced = _ReducedLL(t, s, table)

    if math.isinf(s):
        rho0 = 0.5
        mu = float(reduced.interaction.derivative(np.array([rho0]))[0])
        interaction_energy = 2.0 * float(reduced.interaction.density(np.array([rho0]))[0])
        breakdown = EnergyBreakdown.from_terms(0.0, 0.0, interaction_energy, mu)
    else:
        mu = _solve_unit_mass(reduced.mass)
        edge = _support_edge(mu, s)
        potential = reduced._integrate(mu, lambda x, rho: x ** s * rho)
        local = reduced._integrate(mu, lambda x, rho: reduced.interaction.density(rho))
        breakdown = EnergyBreakdown.from_terms(0.0, potential, local, mu)
        logger.debug("Reduced LL functional at t=%g: mu=%.12g, support edge %.6g", t, mu, edge)

    profile = _sample_profile(reduced.interaction.inverse_derivative, mu, s, grid)
    return breakdown.scaled(N * gamma ** 2, gamma ** 2), _scale_profile(profile, N, N / gamma)


# ---------------------------------------------------------------------------
# Dispatch and continuity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeSolution:
    region: int
    label: str
    energy: float
    profile: DensityProfile
    chemical_potential: Optional[float] = None
    breakdown: Optional[EnergyBreakdown] = None


def solve_regime(params: GasParams, region: Optional[int] = None, table: Optional[LLEnergyTable] = None,
                 thresholds: Optional[RegimeThresholds] = None, tol: float = DEFAULT_TOL) -> RegimeSolution:
    """Solve the regime functional of `region` (classified when omitted)."""
    if region is None:
        region = classify(params, thresholds, table).region
    if region not in REGION_LABELS:
        raise PreconditionError(f"Region must be 1..5, got {region}")
    g = params.coupling()
    N, L, s = params.N, params.L, params.s
    label = REGION_LABELS[region]

    if region == 1:
        energy, profile = solve_ideal(N, L, s)
        return RegimeSolution(region, label, energy, profile)
    if region == 2:
        breakdown, profile = solve_gp_1d(N, L, g, s, tol=tol)
        return RegimeSolution(region, label, breakdown.total, profile, breakdown.chemical_potential, breakdown)
    if region == 3:
        energy, profile, mu = solve_tf(N, L, g, s)
        return RegimeSolution(region, label, energy, profile, mu)
    if region == 4:
        if table is None:
            raise PreconditionError("Region 4 needs a Lieb-Liniger table")
        breakdown, profile = solve_ll_functional(N, L, g, s, table)
        return RegimeSolution(region, label, breakdown.total, profile, breakdown.chemical_potential, breakdown)
    energy, profile, mu = solve_gt(N, L, s)
    return RegimeSolution(region, label, energy, profile, mu)


class ContinuityPoint(BaseModel):
    N: float
    NgL: float
    g_over_gamma: float
    region: int
    label: str
    regime_energy: float
    general_energy: float
    relative_gap: float


def continuity_scan(points: Sequence[GasParams], table: LLEnergyTable,
                    thresholds: Optional[RegimeThresholds] = None,
                    tol: float = DEFAULT_TOL) -> List[ContinuityPoint]:
    """Relative gap between the selected regime solver and the general functional at each point."""
    results = []
    for params in points:
        report = classify(params, thresholds, table)
        regime = solve_regime(params, report.region, table, thresholds, tol)
        _, general = minimize_general(params.N, params.trap(), report.g, table, tol=tol)
        gap = abs(regime.energy - general.total) / general.total
        logger.info("Continuity: NgL=%.4g g/gamma=%.4g region %d gap %.3g",
                    report.NgL, report.g_over_gamma, report.region, gap)
        results.append(ContinuityPoint(
            N=params.N, NgL=report.NgL, g_over_gamma=report.g_over_gamma, region=report.region,
            label=report.label, regime_energy=regime.energy, general_energy=general.total, relative_gap=gap
        ))
    return results
