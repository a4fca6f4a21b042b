"""Lieb-Liniger table persistence."""

import json
import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from errors import TableValidationError
from ll_core import (
    DEFAULT_KNOTS_PER_DECADE,
    DEFAULT_QUAD_ORDER,
    DEFAULT_T_HI,
    DEFAULT_T_LO,
    LLEnergyTable,
    build_table,
    table_from_dict,
    table_to_dict,
)


load_dotenv()

logger = logging.getLogger(__name__)


class LLTableManager:
    """Loads, validates, builds and caches the tabulated e(t) on disk."""

    def __init__(self, table_path: Optional[str] = None):
        """Initialize with table file path."""
        if table_path is None:
            table_path = os.getenv(
                'GAS1D_TABLE_PATH',
                os.path.join(os.path.dirname(os.path.abspath(__file__)), 'll_table.json')
            )
        self.table_path = Path(table_path)
        self.quad_order = int(os.getenv('GAS1D_QUAD_ORDER', str(DEFAULT_QUAD_ORDER)))
        self._table: Optional[LLEnergyTable] = None

    def load_table(self) -> LLEnergyTable:
        """Load the table file; rejects files that fail any invariant check."""
        if not self.table_path.exists():
            raise FileNotFoundError(f"Lieb-Liniger table not found: {self.table_path}")
        try:
            with open(self.table_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise TableValidationError(f"Table file is not valid JSON: {e}") from e
        self._table = table_from_dict(data)
        logger.info("Loaded Lieb-Liniger table from %s (%d knots)", self.table_path, self._table.knots.size)
        return self._table

    def save_table(self, table: LLEnergyTable) -> bool:
        """Write the table as versioned JSON."""
        try:
            self.table_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.table_path, 'w', encoding='utf-8') as f:
                json.dump(table_to_dict(table), f, indent=2)
            return True
        except IOError as e:
            logger.warning("Could not save Lieb-Liniger table to %s: %s", self.table_path, e)
            return False

    def get_table(
        self,
        rebuild: bool = False,
        t_lo: float = DEFAULT_T_LO,
        t_hi: float = DEFAULT_T_HI,
        knots_per_decade: int = DEFAULT_KNOTS_PER_DECADE
    ) -> LLEnergyTable:
        """Return the cached table, loading it or building and saving a new one."""
        if self._table is not None and not rebuild:
            return self._table
        if not rebuild:
            try:
                return self.load_table()
            except FileNotFoundError:
                logger.info("No table at %s; building one", self.table_path)
            except TableValidationError as e:
                logger.warning("Discarding invalid table at %s: %s", self.table_path, e)
        self._table = build_table(t_lo, t_hi, knots_per_decade, self.quad_order)
        self.save_table(self._table)
        return self._table
