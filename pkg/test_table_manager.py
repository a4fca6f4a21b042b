#!/usr/bin/env python3
"""Tests for table persistence."""

import numpy as np
import pytest

from errors import TableValidationError
from table_manager import LLTableManager


def test_save_and_load(table, tmp_path):
    manager = LLTableManager(str(tmp_path / 'table.json'))
    assert manager.save_table(table)
    loaded = LLTableManager(str(tmp_path / 'table.json')).load_table()
    np.testing.assert_array_equal(loaded.knots, table.knots)
    np.testing.assert_array_equal(loaded.values, table.values)


def test_get_table_prefers_file(table, tmp_path):
    path = tmp_path / 'table.json'
    LLTableManager(str(path)).save_table(table)
    manager = LLTableManager(str(path))
    first = manager.get_table()
    assert manager.get_table() is first


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        LLTableManager(str(tmp_path / 'absent.json')).load_table()


def test_malformed_file(tmp_path):
    path = tmp_path / 'table.json'
    path.write_text('{"knots": [1, 2', encoding='utf-8')
    with pytest.raises(TableValidationError):
        LLTableManager(str(path)).load_table()


def test_env_path(monkeypatch, tmp_path):
    monkeypatch.setenv('GAS1D_TABLE_PATH', str(tmp_path / 'env.json'))
    assert LLTableManager().table_path == tmp_path / 'env.json'
