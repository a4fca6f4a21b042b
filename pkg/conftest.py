"""Shared fixtures for the test suite."""

import pytest

from table_manager import LLTableManager


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: multi-minute acceptance checks (deselect with -m "not slow")')


@pytest.fixture(scope='session')
def table(tmp_path_factory):
    """Lieb-Liniger table built once per session in a scratch directory."""
    path = tmp_path_factory.mktemp('tables') / 'll_table.json'
    return LLTableManager(str(path)).get_table()
