#!/usr/bin/env python3
"""End-to-end checks that tie the modules together.

The convergence experiments take minutes; they carry the `slow` marker.
"""

import json
import math

import numpy as np
import pytest

from cli import EXIT_OK, Gas1DRunner, RunConfig, run
from functional import FermionizedInteraction, TrapSpec, mean_density, minimize_general
from ll_core import STRONG_LIMIT
from oracles import bc_chain, bethe_energy_density, delta_smearing_floor, hardcore_upper_bound
from regimes import density_parameter, solve_ll_functional
from table_manager import LLTableManager
from transverse3d import crossover_ratio


TF_UNIT_ENERGY = 0.8 * 0.75 ** (5.0 / 3.0)


@pytest.fixture
def table_manager(table, tmp_path_factory):
    manager = LLTableManager(str(tmp_path_factory.mktemp('runs') / 'll_table.json'))
    manager.save_table(table)
    return manager


def test_energy_coefficient_endpoints(table):
    weak, _ = table.evaluate(np.array([1e-3]))
    strong, _ = table.evaluate(np.array([1e6]))
    assert 0.97 <= weak[0] / 5e-4 <= 1.0
    assert 0.995 * STRONG_LIMIT <= strong[0] <= STRONG_LIMIT


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_bethe_and_integral_equation_agree(table, t):
    bethe = bethe_energy_density(64, t)
    tabulated, _ = table.evaluate(np.array([t]))
    assert abs(bethe - tabulated[0]) / tabulated[0] < 2e-2


def test_finite_size_energies_approach_the_table(table):
    tabulated, _ = table.evaluate(np.array([1.0]))
    gaps = [abs(bethe_energy_density(n, 1.0) - tabulated[0]) for n in (4, 16, 64)]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_thomas_fermi_limit(table):
    N, L = 1e5, 1.0
    scaled = []
    for ngl in (1e2, 1e3, 1e4):
        g = ngl / (N * L)
        profile, breakdown = minimize_general(N, TrapSpec(2.0, L), g, table)
        assert g / mean_density(profile) < 1e-2
        scaled.append(breakdown.total / (N / L ** 2 * ngl ** (2.0 / 3.0)))
    gaps = [abs(value - TF_UNIT_ENERGY) / TF_UNIT_ENERGY for value in scaled]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 2e-2


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_lieb_liniger_limit(table):
    reference, _ = solve_ll_functional(1.0, 1.0, 1.0, 2.0, table)
    gaps = []
    for N in (1e2, 1e3):
        gamma = density_parameter(N, 1.0, 2.0)
        _, breakdown = minimize_general(N, TrapSpec(2.0, 1.0), gamma, table)
        scaled = breakdown.total / (N * gamma ** 2)
        gaps.append(abs(scaled - reference.total) / reference.total)
    assert gaps[1] < gaps[0]
    assert gaps[1] < 1e-2


def test_girardeau_tonks_minimization():
    _, breakdown = minimize_general(1.0, TrapSpec(2.0, 1.0), 1.0, None,
                                    interaction=FermionizedInteraction(), kinetic=False)
    assert breakdown.total == pytest.approx(1.0, abs=1e-3)
    assert breakdown.chemical_potential == pytest.approx(2.0, abs=1e-3)


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_dimensional_crossover():
    results = [crossover_ratio(r, r ** 2 / 4.0) for r in (0.2, 0.1, 0.05)]
    deviations = [abs(1.0 - result.ratio) for result in results]
    assert all(result.upper_bound_holds for result in results)
    assert deviations[0] >= deviations[1] >= deviations[2]
    assert deviations[2] < 5e-2


@pytest.mark.slow
@pytest.mark.timeout(900)
@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("g", [0.1, 1.0, 10.0])
def test_boundary_condition_chain(n, g):
    record = bc_chain(n, 1.0, g)
    assert record.ok, record.flags
    assert record.E_N <= record.E_p <= record.E_D + 1e-8 * record.E_D
    if record.lower_explicit is not None:
        assert record.lower_explicit <= record.E_N


@pytest.mark.slow
@pytest.mark.timeout(900)
@pytest.mark.parametrize("n", [2, 3])
def test_near_hard_core_dirichlet_energy(n):
    record = bc_chain(n, 1.0, 1e4)
    assert record.E_D < hardcore_upper_bound(n, 1.0, 0.0)


def test_hard_core_bound_matches_free_fermions():
    for n in range(1, 11):
        assert hardcore_upper_bound(n, 1.0, 0.0) == pytest.approx(
            math.pi ** 2 * sum(k ** 2 for k in range(1, n + 1)), rel=1e-13
        )


def test_smearing_floor_example():
    values = [delta_smearing_floor(1.0, 1.0, 1.0, 4.0, 2.0, mesh) for mesh in (1e-3, 5e-4)]
    assert values[0] >= -1e-3
    assert abs(values[1]) <= 0.5 * abs(values[0])


def test_randomized_lemma_checks():
    rng = np.random.default_rng(0)
    assert Gas1DRunner._temple_random(rng, 1000).passed
    assert Gas1DRunner._superadditive_random(rng, 100).passed


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_sweep_command(table_manager, tmp_path):
    config = RunConfig(command='sweep', out_dir=str(tmp_path), threads=2)
    assert run(config, table_manager) == EXIT_OK
    report = json.loads((tmp_path / 'report.json').read_text(encoding='utf-8'))
    rows = report['energies']['sweep']
    gaps = [row['relative_gap'] for row in rows]
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] < 2e-2
    assert all(row['g_over_rho_bar'] < 1e-2 for row in rows)
    assert all(row['E_general_scaled'] <= row['E_gp_scaled'] * (1.0 + 1e-4) for row in rows)
    header = (tmp_path / 'sweep.csv').read_text(encoding='utf-8').splitlines()[0]
    assert header == 'NgL,E_gp,E_gp_scaled,E_general,E_general_scaled,E_tf,relative_gap,g_over_rho_bar'
