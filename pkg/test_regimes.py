#!/usr/bin/env python3
"""Tests for the region classifier and the regime-limit solvers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from errors import PreconditionError
from functional import (
    HARD_WALL,
    LiebLinigerInteraction,
    MeanFieldInteraction,
    TrapSpec,
    minimize_general,
)
from regimes import (
    GasParams,
    RegimeThresholds,
    classify,
    continuity_scan,
    density_parameter,
    region_length_scales,
    solve_gp_1d,
    solve_gt,
    solve_ideal,
    solve_ll_functional,
    solve_regime,
    solve_tf,
)


# -- parameters and classification ------------------------------------------

def test_region_three_example(table):
    report = classify(GasParams(N=1e4, L=1.0, r=1e-3, a=1e-6), table=table)
    assert report.g == pytest.approx(4.0, rel=1e-5)
    assert report.gamma == pytest.approx(100.0)
    assert report.NgL == pytest.approx(4e4, rel=1e-5)
    assert report.region == 3
    assert report.label == '1d-tf'
    assert report.rhobar == pytest.approx(1e4 * (4e4) ** (-1.0 / 3.0), rel=1e-5)


@pytest.mark.parametrize("a, region", [(0.0, 1), (1.25e-6, 2), (1e-4, 4)])
def test_other_regions(table, a, region):
    params = GasParams(N=100 if region < 3 else 1e4, L=1.0, r=1e-2 if region < 3 else 1e-3, a=a)
    assert classify(params, table=table).region == region


def test_girardeau_tonks_region(table):
    report = classify(GasParams(N=1e4, L=1.0, r=1e-5, a=2.5e-6), table=table)
    assert report.region == 5
    assert report.rhobar == report.gamma
    assert report.g_over_gamma == pytest.approx(1e3, rel=1e-5)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 4.0), st.floats(-9.0, -3.0), st.floats(0.0, 2.0))
def test_region_grows_with_scattering_length(log_n, log_a, log_factor):
    params = GasParams(N=10.0 ** log_n, L=1.0, r=1e-2, a=10.0 ** log_a)
    stronger = params.model_copy(update={'a': params.a * 10.0 ** log_factor})
    assert classify(stronger).region >= classify(params).region


def test_threshold_order_is_validated():
    with pytest.raises(ValidationError):
        RegimeThresholds(theta1=20.0)
    with pytest.raises(ValidationError):
        RegimeThresholds(theta3=1.0, theta4=0.5)


def test_thresholds_move_the_boundaries(table):
    params = GasParams(N=1e4, L=1.0, r=1e-3, a=1e-6)
    assert classify(params, RegimeThresholds(theta3=1e-3, theta4=10.0), table).region == 4


def test_hard_wall_exponent_round_trip():
    params = GasParams(N=10, L=1.0, r=0.01, a=0.0, s='hard-wall')
    assert params.is_hard_wall
    assert params.model_dump()['s'] == 'hard-wall'
    assert GasParams.model_validate(params.model_dump()).s == HARD_WALL
    with pytest.raises(ValidationError):
        GasParams(N=10, L=1.0, r=0.01, a=0.0, s='box')
    with pytest.raises(ValidationError):
        GasParams(N=0.5, L=1.0, r=0.01, a=0.0)


def test_length_scales():
    scales = region_length_scales(1e4, 2.0, 0.5, 2.0)
    assert scales['NgL'] == 1e4
    assert scales['gamma'] == pytest.approx(50.0)
    assert scales['Lbar_TF'] == pytest.approx(2.0 * 1e4 ** (1.0 / 3.0))
    assert scales['Lbar_LL'] == pytest.approx(2.0 * 100.0)
    assert density_parameter(7.0, 3.0, HARD_WALL) == pytest.approx(7.0 / 3.0)


# -- regime solvers -------------------------------------------------------------

def test_ideal_gas():
    energy, profile = solve_ideal(10.0, 2.0)
    assert energy == pytest.approx(2.5, abs=1e-5)
    assert profile.integral() == pytest.approx(10.0, rel=1e-10)
    box, _ = solve_ideal(3.0, 1.0, HARD_WALL)
    assert box == pytest.approx(3.0 * math.pi ** 2 / 4.0, abs=1e-5)


def test_gp_without_interaction_is_ideal():
    breakdown, _ = solve_gp_1d(10.0, 2.0, 0.0)
    assert breakdown.total == pytest.approx(2.5, abs=1e-5)


def test_gp_matches_direct_minimization():
    breakdown, profile = solve_gp_1d(100.0, 2.0, 0.05)
    trap = TrapSpec(2.0, 2.0)
    _, direct = minimize_general(100.0, trap, 0.05, None, interaction=MeanFieldInteraction(0.05))
    assert breakdown.total == pytest.approx(direct.total, rel=1e-6)
    assert breakdown.chemical_potential == pytest.approx(direct.chemical_potential, rel=1e-5)
    assert profile.integral() == pytest.approx(100.0, rel=1e-10)


def test_gp_rejects_negative_coupling():
    with pytest.raises(PreconditionError):
        solve_gp_1d(1.0, 1.0, -0.1)


def test_thomas_fermi_closed_form():
    energy, profile, mu = solve_tf(1.0, 1.0, 1.0)
    assert mu == pytest.approx(0.75 ** (2.0 / 3.0), rel=1e-10)
    assert energy == pytest.approx(0.8 * 0.75 ** (5.0 / 3.0), rel=1e-10)
    assert profile.integral() == pytest.approx(1.0, rel=1e-10)


def test_thomas_fermi_matches_local_minimizer():
    energy, _, mu = solve_tf(50.0, 3.0, 0.2)
    _, direct = minimize_general(50.0, TrapSpec(2.0, 3.0), 0.2, None,
                                 interaction=MeanFieldInteraction(0.2), kinetic=False)
    assert energy == pytest.approx(direct.total, rel=5e-4)
    assert mu == pytest.approx(direct.chemical_potential, rel=5e-4)


def test_thomas_fermi_box():
    energy, profile, mu = solve_tf(4.0, 1.0, 0.5, HARD_WALL)
    assert energy == pytest.approx(4.0 * 2.0 * 0.25, rel=1e-12)
    assert mu == pytest.approx(2.0 * 0.5, rel=1e-12)
    assert np.allclose(profile.values, 2.0)


def test_girardeau_tonks_closed_form():
    energy, profile, mu = solve_gt(1.0, 1.0)
    assert mu == pytest.approx(2.0, rel=1e-8)
    assert energy == pytest.approx(1.0, rel=1e-8)
    assert solve_gt(1.0, 1.0, HARD_WALL)[0] == pytest.approx(math.pi ** 2 / 12.0)


def test_girardeau_tonks_edge_exponent():
    _, profile, _ = solve_gt(1.0, 1.0)
    edge = math.sqrt(2.0)
    z = profile.grid.points
    near = (z > 0) & (edge - z > 1e-3) & (edge - z < 3e-2)
    slope = np.polyfit(np.log(edge - z[near]), np.log(profile.values[near]), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.05)


def test_lieb_liniger_matches_local_minimizer(table):
    gamma = density_parameter(200.0, 1.0, 2.0)
    breakdown, profile = solve_ll_functional(200.0, 1.0, gamma, 2.0, table)
    _, direct = minimize_general(200.0, TrapSpec(2.0, 1.0), gamma, table,
                                 interaction=LiebLinigerInteraction(gamma, table), kinetic=False)
    assert breakdown.total == pytest.approx(direct.total, rel=1e-3)
    assert profile.integral() == pytest.approx(200.0, rel=1e-8)


def test_lieb_liniger_weak_limit(table):
    breakdown, _ = solve_ll_functional(1.0, 1.0, 1e-3, 2.0, table)
    energy_tf, _, _ = solve_tf(1.0, 1.0, 1e-3)
    assert breakdown.total == pytest.approx(energy_tf, rel=2e-2)
    assert breakdown.total < energy_tf


def test_lieb_liniger_strong_limit(table):
    breakdown, _ = solve_ll_functional(1.0, 1.0, 1e3, 2.0, table)
    energy_gt, _, _ = solve_gt(1.0, 1.0)
    assert breakdown.total == pytest.approx(energy_gt, rel=1e-2)
    assert breakdown.total < energy_gt


def test_lieb_liniger_box(table):
    breakdown, profile = solve_ll_functional(10.0, 1.0, 10.0, HARD_WALL, table)
    e, _ = table.evaluate(np.array([2.0]))
    assert breakdown.total == pytest.approx(2.0 * 10.0 ** 3 / 8.0 * e[0], rel=1e-10)
    assert np.allclose(profile.values, 5.0)


def test_gradient_share_vanishes_in_thomas_fermi_limit():
    breakdown, _ = solve_gp_1d(1.0, 1.0, 1e3)
    assert breakdown.kinetic / breakdown.total < 10.0 * 1e3 ** (-4.0 / 3.0)


# -- dispatch and continuity -------------------------------------------------------

def test_solve_regime_dispatch(table):
    params = GasParams(N=1e4, L=1.0, r=1e-3, a=1e-6)
    solution = solve_regime(params, table=table)
    assert solution.region == 3
    assert solution.profile.integral() == pytest.approx(1e4, rel=1e-8)
    with pytest.raises(PreconditionError):
        solve_regime(params, region=4)
    with pytest.raises(PreconditionError):
        solve_regime(params, region=6, table=table)


def test_continuity_across_the_ideal_gas_boundary(table):
    r = 1e-2
    points = [GasParams(N=100, L=1.0, r=r, a=(ngl / 100) * r ** 2 / 4.0) for ngl in (0.05, 0.2, 5.0)]
    results = continuity_scan(points, table)
    assert [point.region for point in results] == [1, 2, 2]
    for point in results:
        assert point.relative_gap < 0.05


def _at_coupling(N: float, g: float, r: float = 1e-4) -> GasParams:
    return GasParams(N=N, L=1.0, r=r, a=g * r ** 2 / 4.0)


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_continuity_at_the_thomas_fermi_boundary(table):
    N = 1e4
    results = continuity_scan([_at_coupling(N, ngl / N) for ngl in (8.0, 12.0, 20.0, 50.0)], table)
    assert [point.region for point in results] == [2, 3, 3, 3]
    assert results[0].relative_gap < 0.05
    tf_gaps = [point.relative_gap for point in results[1:]]
    assert tf_gaps == sorted(tf_gaps, reverse=True)
    assert tf_gaps[-1] < 0.05


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_continuity_at_the_lieb_liniger_boundary(table):
    N = 1e3
    gamma = density_parameter(N, 1.0, 2.0)
    results = continuity_scan([_at_coupling(N, ratio * gamma) for ratio in (0.01, 0.099, 0.11, 1.0)], table)
    assert [point.region for point in results] == [3, 3, 4, 4]
    assert results[0].relative_gap < 0.05
    assert results[0].relative_gap < results[1].relative_gap
    assert all(point.relative_gap < 0.05 for point in results[2:])


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_continuity_at_the_girardeau_tonks_boundary(table):
    N = 1e3
    gamma = density_parameter(N, 1.0, 2.0)
    results = continuity_scan([_at_coupling(N, ratio * gamma) for ratio in (9.9, 20.0, 1e3)], table)
    assert [point.region for point in results] == [4, 5, 5]
    assert results[0].relative_gap < 0.05
    assert results[2].relative_gap < 0.05
    assert results[2].relative_gap < results[1].relative_gap
