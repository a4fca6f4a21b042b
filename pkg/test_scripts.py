#!/usr/bin/env python3
"""Smoke tests for the table diagnostic and the usage examples."""

import json

import pytest

import example_usage
from diagnose_table import diagnose_table
from ll_core import table_to_dict
from table_manager import LLTableManager


@pytest.fixture
def saved_table(table, tmp_path, monkeypatch):
    path = tmp_path / 'll_table.json'
    assert LLTableManager(str(path)).save_table(table)
    monkeypatch.setenv('GAS1D_TABLE_PATH', str(path))
    return path


# -- diagnose_table -----------------------------------------------------------------

def test_diagnose_reports_every_section(saved_table, capsys):
    result = diagnose_table(str(saved_table), spot_checks=3)
    out = capsys.readouterr().out
    assert isinstance(result, bool)
    for section in ('CHECKING FILE FORMAT', 'CHECKING TABLE INVARIANTS', 'SPOT CHECKS', 'TAILS'):
        assert section in out
    assert out.count(' t=') >= 3 + 2


def test_diagnose_missing_file(tmp_path, capsys):
    assert not diagnose_table(str(tmp_path / 'absent.json'))
    assert 'File not found' in capsys.readouterr().out


def test_diagnose_malformed_json(tmp_path, capsys):
    path = tmp_path / 'll_table.json'
    path.write_text('{"knots": [1, 2', encoding='utf-8')
    assert not diagnose_table(str(path))
    assert 'JSON Parse Error' in capsys.readouterr().out


def test_diagnose_rejects_a_flat_table(table, tmp_path, capsys):
    data = table_to_dict(table)
    data['e'][10] = data['e'][9]
    path = tmp_path / 'll_table.json'
    path.write_text(json.dumps(data), encoding='utf-8')
    assert not diagnose_table(str(path))
    out = capsys.readouterr().out
    assert 'not strictly increasing' in out
    assert 'SPOT CHECKS' not in out


# -- example_usage ------------------------------------------------------------------

def test_example_oracles(capsys):
    example_usage.example_oracles()
    out = capsys.readouterr().out
    assert 'Bethe periodic energy' in out
    assert out.rstrip().endswith('True')


def test_example_hard_wall(saved_table, capsys):
    example_usage.example_hard_wall()
    assert 'Hard wall, region' in capsys.readouterr().out


def test_example_classify_and_solve(saved_table, capsys):
    example_usage.example_classify_and_solve()
    out = capsys.readouterr().out
    assert 'Regime energy' in out
    assert 'General energy' in out
    assert 'Validity passed' in out


@pytest.mark.slow
@pytest.mark.timeout(900)
def test_example_crossover_and_continuity(saved_table, capsys):
    example_usage.example_crossover()
    example_usage.example_continuity()
    out = capsys.readouterr().out
    assert 'ratio=' in out
    assert out.count("'relative_gap'") == 4
