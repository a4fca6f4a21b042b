#!/usr/bin/env python3
"""Tests for the command-line runner, its config model and report format."""

import json
from pathlib import Path

import pytest
from pydantic import ValidationError

import cli
from cli import (
    EXIT_CONFIG,
    EXIT_INVARIANT,
    EXIT_OK,
    EXIT_SOLVER,
    Gas1DRunner,
    InvariantResult,
    RunConfig,
    load_config,
    main,
    report_schema,
    run,
)
from errors import ConvergenceError, InvariantViolation
from table_manager import LLTableManager


REGION_THREE = {'N': 1e4, 'L': 1.0, 'r': 1e-3, 'a': 1e-6}
SCHEMA_PATH = Path(__file__).parent / 'schemas' / 'run_report.schema.json'


@pytest.fixture
def table_manager(table, tmp_path, monkeypatch):
    """Manager over a saved copy of the session table; also used by main()."""
    path = tmp_path / 'll_table.json'
    manager = LLTableManager(str(path))
    manager.save_table(table)
    monkeypatch.setenv('GAS1D_TABLE_PATH', str(path))
    return manager


def classify_config(out_dir, **extra):
    return RunConfig(command='classify', params=REGION_THREE, out_dir=str(out_dir), **extra)


def read_report(out_dir):
    return json.loads((Path(out_dir) / 'report.json').read_text(encoding='utf-8'))


# -- config ------------------------------------------------------------------------

def test_config_defaults(monkeypatch):
    monkeypatch.setenv('GAS1D_THREADS', '3')
    monkeypatch.setenv('GAS1D_OUT_DIR', 'elsewhere')
    config = RunConfig(command='sweep')
    assert config.threads == 3
    assert config.out_dir == 'elsewhere'
    assert config.sweep_NgL == [1e2, 1e3, 1e4]
    assert config.sweep_N == 1e5
    assert [case.g for case in config.oracle_cases] == [0.1, 1.0, 10.0]


def test_config_round_trip():
    config = RunConfig(command='solve', params={**REGION_THREE, 's': 'hard-wall'}, seed=12)
    echo = config.model_dump(mode='json')
    assert echo['params']['s'] == 'hard-wall'
    assert RunConfig.model_validate(echo) == config


@pytest.mark.parametrize("data", [
    {'command': 'plot'},
    {'command': 'sweep', 'sweep_NgL': [10.0, -1.0]},
    {'command': 'sweep', 'sweep_NgL': []},
    {'command': 'e-of-gamma', 't_range': [10.0, 1.0]},
    {'command': 'oracle', 'oracle_cases': [{'n': 4}]},
    {'command': 'sweep', 'threads': 0},
    {'command': 'sweep', 'seed': -1},
    {'command': 'sweep', 'colour': 'red'},
])
def test_invalid_configs(data):
    with pytest.raises(ValidationError):
        RunConfig.model_validate(data)


def test_overrides_win(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'command': 'classify', 'seed': 3, 'out_dir': 'a'}), encoding='utf-8')
    config = load_config(str(path), {'command': 'e-of-gamma', 'seed': None, 'out_dir': 'b'})
    assert config.command == 'e-of-gamma'
    assert config.seed == 3
    assert config.out_dir == 'b'


def test_invariant_alias():
    item = InvariantResult(name='x', passed=True)
    assert item.model_dump(by_alias=True) == {'name': 'x', 'pass': True, 'detail': ''}
    assert InvariantResult.model_validate({'name': 'x', 'pass': False}).passed is False


# -- commands ------------------------------------------------------------------------

def test_classify_run(table_manager, tmp_path, capsys):
    assert run(classify_config(tmp_path), table_manager) == EXIT_OK
    report = read_report(tmp_path)
    assert report['regime_report']['region'] == 3
    assert report['regime_report']['label'] == '1d-tf'
    assert [(item['name'], item['pass']) for item in report['invariants']] == [('lbar_positive', True)]
    assert report['config_echo']['command'] == 'classify'
    assert '✓ lbar_positive' in capsys.readouterr().out


def test_report_is_deterministic(table_manager, tmp_path):
    config = classify_config(tmp_path)
    run(config, table_manager)
    first = (tmp_path / 'report.json').read_bytes()
    run(config, table_manager)
    assert (tmp_path / 'report.json').read_bytes() == first


def test_metadata_is_separate(table_manager, tmp_path):
    run(classify_config(tmp_path), table_manager)
    metadata = json.loads((tmp_path / 'metadata.json').read_text(encoding='utf-8'))
    assert metadata['version'] == cli.__version__
    assert metadata['command'] == 'classify'
    assert 'created' in metadata
    assert 'created' not in (tmp_path / 'report.json').read_text(encoding='utf-8')


def test_e_of_gamma_run(table_manager, tmp_path):
    config = RunConfig(command='e-of-gamma', t_points=5, out_dir=str(tmp_path), gnuplot=True)
    assert run(config, table_manager) == EXIT_OK
    lines = (tmp_path / 'e_of_gamma.csv').read_text(encoding='utf-8').splitlines()
    assert lines[0] == 't,e,e_prime'
    assert len(lines) == 6
    assert float(lines[1].split(',')[0]) == pytest.approx(1e-3)
    assert (tmp_path / 'e_of_gamma.gp').exists()
    assert read_report(tmp_path)['profiles_written'] == ['e_of_gamma.csv']


def test_solve_run(table_manager, tmp_path):
    params = {'N': 100, 'L': 1.0, 'r': 1e-2, 'a': 1.25e-6}
    config = RunConfig(command='solve', params=params, out_dir=str(tmp_path))
    assert run(config, table_manager) == EXIT_OK
    report = read_report(tmp_path)
    assert report['regime_report']['region'] == 2
    assert report['regime_report']['rhobar_self_consistent'] > 0
    assert report['energies']['relative_gap'] < 0.05
    assert {item['name'] for item in report['invariants']} == {
        'mass_conserved', 'energy_terms_nonnegative', 'euler_lagrange_constant'
    }
    assert sorted(report['profiles_written']) == ['profile.csv', 'regime_profile.csv']


def test_oracle_run(table_manager, tmp_path):
    config = RunConfig(command='oracle', oracle_cases=[{'n': 2, 'g': 1.0}], out_dir=str(tmp_path))
    assert run(config, table_manager) == EXIT_OK
    report = read_report(tmp_path)
    names = [item['name'] for item in report['invariants']]
    assert names == ['bc_chain n=2 g=1', 'bethe_grid n=2 g=1', 'temple_random_matrices', 'superadditive_random']
    assert (tmp_path / 'bounds.csv').exists()


# -- exit codes -------------------------------------------------------------------------

def test_missing_params_is_a_config_error(table_manager, tmp_path):
    config = RunConfig(command='classify', out_dir=str(tmp_path))
    assert run(config, table_manager) == EXIT_CONFIG


def test_solver_failure_exit_code(table_manager, tmp_path, monkeypatch):
    def fail(self):
        raise ConvergenceError("no progress")

    monkeypatch.setattr(Gas1DRunner, 'run_classify', fail)
    assert run(classify_config(tmp_path), table_manager) == EXIT_SOLVER


def test_invariant_violation_exit_code(table_manager, tmp_path, monkeypatch):
    def violate(self):
        raise InvariantViolation("broken")

    monkeypatch.setattr(Gas1DRunner, 'run_classify', violate)
    assert run(classify_config(tmp_path), table_manager) == EXIT_INVARIANT


def test_failed_invariant_exit_code(table_manager, tmp_path, monkeypatch, capsys):
    def record_failure(self):
        self.report.invariants.append(InvariantResult(name='always_fails', passed=False))

    monkeypatch.setattr(Gas1DRunner, 'run_classify', record_failure)
    assert run(classify_config(tmp_path), table_manager) == EXIT_INVARIANT
    assert read_report(tmp_path)['invariants'][0]['pass'] is False
    assert '⚠' in capsys.readouterr().out


def test_main_classify(table_manager, tmp_path):
    config_path = tmp_path / 'run.json'
    config_path.write_text(json.dumps({'command': 'classify', 'params': REGION_THREE}), encoding='utf-8')
    out = tmp_path / 'out'
    assert main(['--config', str(config_path), '--out', str(out)]) == EXIT_OK
    assert read_report(out)['regime_report']['region'] == 3


@pytest.mark.parametrize("contents", [None, '{"command": ', '{"command": "classify", "colour": 1}'])
def test_main_config_errors(tmp_path, contents):
    path = tmp_path / 'run.json'
    if contents is not None:
        path.write_text(contents, encoding='utf-8')
    assert main(['--config', str(path)]) == EXIT_CONFIG


def test_main_without_command(tmp_path):
    assert main(['--out', str(tmp_path)]) == EXIT_CONFIG


# -- schema ---------------------------------------------------------------------------

def test_write_schema(tmp_path):
    path = tmp_path / 'schema.json'
    assert main(['--write-schema', str(path)]) == EXIT_OK
    assert json.loads(path.read_text(encoding='utf-8')) == report_schema()


def test_shipped_schema_matches_model():
    shipped = json.loads(SCHEMA_PATH.read_text(encoding='utf-8'))
    generated = report_schema()
    assert shipped['title'] == generated['title']
    assert set(shipped['properties']) == set(generated['properties'])
    assert shipped.get('required', []) == generated.get('required', [])
    assert set(shipped['$defs']) == set(generated['$defs'])
    for name, definition in generated['$defs'].items():
        assert set(shipped['$defs'][name]['properties']) == set(definition['properties'])
        assert sorted(shipped['$defs'][name].get('required', [])) == sorted(definition.get('required', []))
