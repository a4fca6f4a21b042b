#!/usr/bin/env python3
"""Diagnostic script to check a tabulated Lieb-Liniger e(t) file."""

import json
import os
import sys

import numpy as np

from errors import TableValidationError
from ll_core import STRONG_LIMIT, solve_ll_point, table_from_dict


def diagnose_table(table_path, spot_checks=8):
    """Diagnose a table file; returns True when every check passed."""
    print(f"\n{'='*80}")
    print(f"DIAGNOSING: {table_path}")
    print(f"{'='*80}\n")

    if not os.path.exists(table_path):
        print(f"❌ ERROR: File not found: {table_path}")
        return False

    print("1. CHECKING FILE FORMAT")
    print("-" * 80)
    try:
        with open(table_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        print(f"✓ JSON is well-formed ({os.path.getsize(table_path)} bytes)")
    except json.JSONDecodeError as e:
        print(f"❌ JSON Parse Error: {e}")
        return False
    print(f"Format version: {data.get('version', 'missing')}")

    print("\n2. CHECKING TABLE INVARIANTS")
    print("-" * 80)
    try:
        table = table_from_dict(data)
    except TableValidationError as e:
        print(f"❌ {e}")
        return False
    print(f"✓ {table.knots.size} knots on [{table.t_lo:g}, {table.t_hi:g}], quad_order={table.quad_order}")
    print("✓ Monotone, concave, bounded by min(t/2, pi^2/3)")
    print(f"Tail corrections: weak={table.weak_correction:.4g}, strong={table.strong_correction:.4g}")

    print("\n3. SPOT CHECKS AGAINST THE INTEGRAL EQUATION")
    print("-" * 80)
    ok = True
    log_knots = np.log(table.knots)
    picks = np.linspace(0, table.knots.size - 2, spot_checks).astype(int)
    for k in picks:
        t = float(np.exp(0.5 * (log_knots[k] + log_knots[k + 1])))
        exact = solve_ll_point(t, quad_order=table.quad_order)
        e, de = table.evaluate(np.array([t]))
        rel = abs(e[0] - exact.e) / exact.e
        marker = '✓' if rel < 1e-6 else '❌'
        ok = ok and rel < 1e-6
        print(f"{marker} t={t:11.5g}  e={e[0]:.10f}  solver={exact.e:.10f}  rel={rel:.2e}  "
              f"e'={de[0]:.6g} ({exact.e_prime:.6g})")

    print("\n4. TAILS")
    print("-" * 80)
    for label, t in (('weak', 0.5 * table.t_lo), ('strong', 2.0 * table.t_hi)):
        e, _ = table.evaluate(np.array([t]))
        upper = min(0.5 * t, STRONG_LIMIT)
        if 0 < e[0] <= upper:
            print(f"✓ {label} tail at t={t:g}: e={e[0]:.10g} (bound {upper:.10g})")
        else:
            ok = False
            print(f"⚠ {label} tail at t={t:g} outside (0, {upper:.10g}]: e={e[0]:.10g}")

    print(f"\n{'='*80}")
    print("✓ Table passed all checks" if ok else "❌ Table failed at least one check")
    print(f"{'='*80}\n")
    return ok


if __name__ == '__main__':
    if len(sys.argv) < 2:
        print("Usage: python diagnose_table.py <ll_table.json>")
        sys.exit(1)
    sys.exit(0 if diagnose_table(sys.argv[1]) else 1)
