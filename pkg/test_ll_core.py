#!/usr/bin/env python3
"""Tests for the Lieb-Liniger energy coefficient and its table."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import PreconditionError, TableValidationError
from ll_core import (
    STRONG_LIMIT,
    LLEnergyTable,
    _second_divided_differences,
    energy_density,
    energy_density_derivative,
    eval_e,
    solve_ll_point,
    table_from_dict,
    table_to_dict,
    validate_table,
)


def test_free_gas_point():
    point = solve_ll_point(0.0)
    assert point.e == 0.0
    assert point.e_prime == 0.5


@pytest.mark.parametrize("t, quad_order", [(-1.0, 64), (math.inf, 64), (1.0, 8)])
def test_solve_point_rejects_bad_input(t, quad_order):
    with pytest.raises(PreconditionError):
        solve_ll_point(t, quad_order)


def test_strong_coupling_point():
    point = solve_ll_point(1e6)
    assert point.e == pytest.approx(STRONG_LIMIT, rel=5e-3)
    assert point.e < STRONG_LIMIT


def test_unit_coupling_agrees_between_quadrature_orders():
    assert solve_ll_point(1.0, 64).e == pytest.approx(solve_ll_point(1.0, 128).e, rel=1e-6)


@pytest.mark.parametrize("t", [1e-2, 1.0, 10.0, 100.0])
def test_quadrature_doubling(t):
    assert solve_ll_point(t, 256).e == pytest.approx(solve_ll_point(t, 512).e, rel=1e-8)


def test_slope_matches_difference_quotient():
    step = 1e-5
    point = solve_ll_point(2.0)
    quotient = (solve_ll_point(2.0 + step).e - solve_ll_point(2.0 - step).e) / (2 * step)
    assert point.e_prime == pytest.approx(quotient, rel=1e-6)


def test_eval_e_endpoints(table):
    assert eval_e(table, 0.0).e == 0.0
    assert eval_e(table, 1e-3).e == pytest.approx(5e-4, rel=1e-2)
    with pytest.raises(PreconditionError):
        eval_e(table, -1e-3)


def test_eval_e_reproduces_knots(table):
    for k in range(0, table.knots.size, 7):
        point = eval_e(table, float(table.knots[k]))
        assert point.e == pytest.approx(table.values[k], rel=1e-12)
        assert point.e_prime == pytest.approx(table.derivatives[k], rel=1e-12)


def test_table_passes_its_own_checks(table):
    validate_table(table)


def test_corrupted_table_is_rejected(table):
    values = table.values.copy()
    values[10] = values[9]
    broken = LLEnergyTable(
        knots=table.knots, values=values, derivatives=table.derivatives,
        t_lo=table.t_lo, t_hi=table.t_hi, quad_order=table.quad_order
    )
    with pytest.raises(TableValidationError):
        validate_table(broken)


def test_sweep_invariants(table):
    t = np.logspace(-4, 6, 2001)
    e, de = table.evaluate(t)
    assert np.all(np.diff(e) >= 0)
    assert np.all(e < STRONG_LIMIT)
    assert np.all(de >= 0)
    assert np.all(t * table.evaluate(1.0 / t)[0] <= 0.5 + 1e-9)


def test_cubic_transform_is_convex_on_knots(table):
    u = 1.0 / table.knots[::-1]
    cubic = u ** 3 * table.values[::-1]
    du = np.diff(u)
    slack = 1e-9 * np.abs(cubic[1:-1]) / (du[1:] * du[:-1])
    assert np.all(_second_divided_differences(u, cubic) >= -slack)


@settings(max_examples=200, deadline=None)
@given(st.floats(-4.0, 6.0), st.floats(-4.0, 6.0))
def test_monotone(table, log_t1, log_t2):
    lo, hi = sorted((10.0 ** log_t1, 10.0 ** log_t2))
    e, _ = table.evaluate(np.array([lo, hi]))
    assert e[1] >= e[0]


def test_tails_approach_their_limits(table):
    weak_t = np.array([1e-3, 1e-4, 1e-5])
    weak = np.abs(table.evaluate(weak_t)[0] - weak_t / 2) / weak_t
    assert np.all(np.diff(weak) < 0)
    strong = np.abs(table.evaluate(np.array([1e4, 1e5, 1e6]))[0] - STRONG_LIMIT)
    assert np.all(np.diff(strong) < 0)
    assert table.evaluate(np.array([math.inf]))[0][0] == STRONG_LIMIT


def test_energy_density_limits(table):
    assert energy_density(0.0, 3.0, table) == 0.0
    assert energy_density(2.0, 0.0, table) == 0.0
    rho = 0.7
    assert energy_density(rho, 1e6 * rho, table) == pytest.approx(STRONG_LIMIT * rho ** 3, rel=5e-3)


def test_energy_density_rejects_negative_input(table):
    with pytest.raises(PreconditionError):
        energy_density(np.array([1.0, -1.0]), 1.0, table)
    with pytest.raises(PreconditionError):
        energy_density(1.0, -1.0, table)


@pytest.mark.parametrize("rho", [0.05, 0.7, 30.0])
def test_energy_density_derivative(table, rho):
    step = 1e-6 * rho
    quotient = (energy_density(rho + step, 1.0, table) - energy_density(rho - step, 1.0, table)) / (2 * step)
    assert energy_density_derivative(rho, 1.0, table) == pytest.approx(quotient, rel=1e-6)
    assert energy_density_derivative(0.0, 1.0, table) == 0.0


def test_codec_preserves_table(table):
    restored = table_from_dict(table_to_dict(table))
    t = np.logspace(-3, 4, 50)
    np.testing.assert_array_equal(restored.evaluate(t)[0], table.evaluate(t)[0])


def test_codec_rejects_unknown_version(table):
    data = table_to_dict(table)
    data['version'] = 99
    with pytest.raises(TableValidationError):
        table_from_dict(data)
