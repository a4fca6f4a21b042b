#!/usr/bin/env python3
"""
Command-line runner for the elongated-trap 1D Bose gas toolkit.

Commands: solve, classify, sweep, oracle, gp3d, e-of-gamma. Every run writes a
deterministic report.json (plus CSV tables) into the output directory and a
separate metadata.json carrying the timestamp.
"""

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from errors import ConvergenceError, Gas1DError, InvariantViolation, MemoryBudgetError, PreconditionError
from functional import (
    TrapSpec,
    ValidityThresholds,
    euler_lagrange_residual,
    mean_density,
    minimize_general,
    resolve_interaction,
    validity_check,
)
from oracles import (
    BoundsRecord,
    bc_chain,
    bethe_ground_state,
    superadditive_bound,
    temple_lower_bound,
    write_bounds_csv,
)
from regimes import (
    GasParams,
    RegimeReport,
    RegimeThresholds,
    attach_self_consistent,
    classify,
    solve_gp_1d,
    solve_regime,
    solve_tf,
)
from table_manager import LLTableManager
from transverse3d import crossover_ratio


load_dotenv()

__version__ = '1.0.0'

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4

logger = logging.getLogger(__name__)


class OracleCase(BaseModel):
    n: Literal[2, 3] = 2
    ell: float = Field(default=1.0, gt=0)
    g: float = Field(default=1.0, ge=0)
    mesh: Optional[int] = None


def _default_oracle_cases() -> List[OracleCase]:
    return [OracleCase(n=2, g=0.1), OracleCase(n=2, g=1.0), OracleCase(n=2, g=10.0)]


class RunConfig(BaseModel):
    """One run of the toolkit; flags on the command line override these values."""
    model_config = ConfigDict(extra='forbid')

    command: Literal['solve', 'classify', 'sweep', 'oracle', 'gp3d', 'e-of-gamma']
    params: Optional[GasParams] = None
    thresholds: RegimeThresholds = Field(default_factory=RegimeThresholds)
    validity: ValidityThresholds = Field(default_factory=ValidityThresholds)
    sweep_NgL: List[float] = Field(default_factory=lambda: [1e2, 1e3, 1e4], min_length=1)
    sweep_s: float = Field(default=2.0, gt=0)
    sweep_N: float = Field(default=1e5, gt=0)
    oracle_cases: List[OracleCase] = Field(default_factory=_default_oracle_cases, min_length=1)
    crossover_r: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05], min_length=1)
    crossover_g: float = Field(default=1.0, ge=0)
    t_range: Tuple[float, float] = (1e-3, 1e3)
    t_points: int = Field(default=121, ge=2)
    tol: float = Field(default=1e-8, gt=0)
    out_dir: str = Field(default_factory=lambda: os.getenv('GAS1D_OUT_DIR', 'runs'))
    threads: int = Field(default_factory=lambda: int(os.getenv('GAS1D_THREADS', '1')), ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    gnuplot: bool = False

    @field_validator('sweep_NgL', 'crossover_r')
    @classmethod
    def positive_entries(cls, values: List[float]) -> List[float]:
        if any(not v > 0 for v in values):
            raise ValueError("Sweep entries must be positive")
        return values

    @field_validator('t_range')
    @classmethod
    def ordered_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not 0 < value[0] < value[1]:
            raise ValueError(f"t_range must satisfy 0 < t_lo < t_hi, got {value}")
        return value


class InvariantResult(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    name: str
    passed: bool = Field(alias='pass')
    detail: str = ''


class RunReport(BaseModel):
    config_echo: Dict[str, Any]
    regime_report: Optional[RegimeReport] = None
    energies: Dict[str, Any] = Field(default_factory=dict)
    profiles_written: List[str] = Field(default_factory=list)
    invariants: List[InvariantResult] = Field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(item.passed for item in self.invariants)


def _invariant(name: str, passed: bool, detail: str = '') -> InvariantResult:
    return InvariantResult(name=name, passed=bool(passed), detail=detail)


class Gas1DRunner:
    """Executes one RunConfig and writes its outputs."""

    def __init__(self, config: RunConfig, table_manager: Optional[LLTableManager] = None):
        """Initialize with a validated config."""
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.table_manager = table_manager or LLTableManager()
        self.report = RunReport(config_echo=config.model_dump(mode='json'))

    # -- output helpers ----------------------------------------------------

    def _write_csv(self, name: str, columns: Sequence[np.ndarray], header: str) -> None:
        path = self.out_dir / name
        np.savetxt(path, np.column_stack(columns), delimiter=',', header=header, comments='', fmt='%.17g')
        self.report.profiles_written.append(name)
        if self.config.gnuplot:
            self._write_gnuplot(name, header)

    def _write_gnuplot(self, name: str, header: str) -> None:
        labels = header.split(',')
        lines = [
            "set datafile separator ','",
            f"set xlabel '{labels[0]}'",
            f"set ylabel '{labels[1]}'",
            f"plot '{name}' every ::1 using 1:2 with lines title '{labels[1]}'"
        ]
        (self.out_dir / f"{Path(name).stem}.gp").write_text('\n'.join(lines) + '\n', encoding='utf-8')

    def _map(self, func: Callable, items: Sequence) -> List:
        """Ordered parallel map over isolated solver tasks."""
        if self.config.threads == 1 or len(items) == 1:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
            return list(pool.map(func, items))

    def _require_params(self) -> GasParams:
        if self.config.params is None:
            raise PreconditionError(f"Command '{self.config.command}' needs 'params' in the config")
        return self.config.params

    # -- commands ----------------------------------------------------------

    def run_classify(self) -> None:
        params = self._require_params()
        table = self.table_manager.get_table()
        report = classify(params, self.config.thresholds, table, self.config.validity)
        self.report.regime_report = report
        self.report.invariants.append(_invariant(
            'lbar_positive', report.Lbar_LL > 0 and (report.Lbar_TF > 0 or report.NgL == 0),
            f"Lbar_TF={report.Lbar_TF:.6g}, Lbar_LL={report.Lbar_LL:.6g}"
        ))

    def run_solve(self) -> None:
        params = self._require_params()
        table = self.table_manager.get_table()
        report = classify(params, self.config.thresholds, table, self.config.validity)
        trap = params.trap()
        profile, breakdown = minimize_general(params.N, trap, report.g, table, tol=self.config.tol)
        self.report.regime_report = attach_self_consistent(report, profile)
        regime = solve_regime(params, report.region, table, self.config.thresholds, self.config.tol)
        validity = validity_check(params, profile, table, self.config.validity)

        self.report.energies = {
            'general': breakdown.as_dict(),
            'regime': {'region': regime.region, 'label': regime.label, 'total': regime.energy,
                       'chemical_potential': regime.chemical_potential},
            'relative_gap': abs(regime.energy - breakdown.total) / breakdown.total,
            'validity': validity.model_dump()
        }
        self._write_csv('profile.csv', [profile.grid.points, profile.values], 'z,rho')
        self._write_csv('regime_profile.csv', [regime.profile.grid.points, regime.profile.values], 'z,rho')

        interaction = resolve_interaction(report.g, table, None)
        _, spread = euler_lagrange_residual(profile, trap, interaction)
        mass_error = abs(profile.integral() - params.N) / params.N
        self.report.invariants.extend([
            _invariant('mass_conserved', mass_error < 1e-10, f"relative error {mass_error:.3g}"),
            _invariant('energy_terms_nonnegative',
                       min(breakdown.kinetic, breakdown.potential, breakdown.interaction) >= 0),
            _invariant('euler_lagrange_constant', spread < 1e-3, f"relative spread {spread:.3g}")
        ])

    def run_sweep(self) -> None:
        s = self.config.sweep_s
        N = self.config.sweep_N
        values = sorted(self.config.sweep_NgL)
        table = self.table_manager.get_table()
        trap = TrapSpec(s, 1.0)
        tf_energy, _, _ = solve_tf(1.0, 1.0, 1.0, s)
        exponent = s / (s + 1.0) if math.isfinite(s) else 1.0

        def task(ngl: float) -> Tuple[float, float, float]:
            gp, _ = solve_gp_1d(1.0, 1.0, ngl, s, tol=self.config.tol)
            g = ngl / N
            profile, general = minimize_general(N, trap, g, table, tol=self.config.tol)
            return gp.total, general.total, g / mean_density(profile)

        results = np.array(self._map(task, values))
        ngl = np.array(values)
        gp_energies, general_energies, dilution = results[:, 0], results[:, 1], results[:, 2]
        gp_scaled = gp_energies / ngl ** exponent
        general_scaled = general_energies / (N * ngl ** exponent)
        gaps = np.abs(general_scaled - tf_energy) / tf_energy
        self._write_csv('sweep.csv',
                        [ngl, gp_energies, gp_scaled, general_energies, general_scaled,
                         np.full_like(ngl, tf_energy), gaps, dilution],
                        'NgL,E_gp,E_gp_scaled,E_general,E_general_scaled,E_tf,relative_gap,g_over_rho_bar')
        self.report.energies = {
            'E_tf_unit': tf_energy,
            'N': N,
            'sweep': [{'NgL': float(x), 'E_gp': float(e), 'E_gp_scaled': float(sc),
                       'E_general': float(eg), 'E_general_scaled': float(sg),
                       'relative_gap': float(gp), 'g_over_rho_bar': float(d)}
                      for x, e, sc, eg, sg, gp, d in zip(ngl, gp_energies, gp_scaled, general_energies,
                                                           general_scaled, gaps, dilution)]
        }
        self.report.invariants.extend([
            _invariant('tf_limit_trend', bool(np.all(np.diff(gaps) < 0)) if gaps.size > 1 else True,
                       'scaled general energy approaches the TF value as NgL grows'),
            _invariant('dilute_sweep', bool(np.all(dilution < 1e-2)),
                       f"max g/rho_bar {float(dilution.max()):.3g}")
        ])

    def run_oracle(self) -> None:
        cases = self.config.oracle_cases
        records: List[BoundsRecord] = self._map(lambda case: bc_chain(case.n, case.ell, case.g, case.mesh), cases)
        write_bounds_csv(records, str(self.out_dir / 'bounds.csv'))
        self.report.profiles_written.append('bounds.csv')

        bethe = []
        for case, record in zip(cases, records):
            state = bethe_ground_state(case.n, case.ell, case.g)
            deviation = abs(state.energy - record.E_p) / max(abs(state.energy), 1e-12)
            bethe.append({'n': case.n, 'ell': case.ell, 'g': case.g, 'E_bethe': state.energy,
                          'E_p_grid': record.E_p, 'relative_deviation': deviation})
            self.report.invariants.append(_invariant(
                f"bc_chain n={case.n} g={case.g:g}", record.ok, json.dumps(record.flags, sort_keys=True)
            ))
            self.report.invariants.append(_invariant(
                f"bethe_grid n={case.n} g={case.g:g}", deviation < 1e-2, f"relative deviation {deviation:.3g}"
            ))

        rng = np.random.default_rng(self.config.seed)
        self.report.invariants.append(self._temple_random(rng))
        self.report.invariants.append(self._superadditive_random(rng))
        self.report.energies = {
            'bounds': [record.model_dump() for record in records],
            'bethe': bethe
        }

    @staticmethod
    def _temple_random(rng: np.random.Generator, trials: int = 1000) -> InvariantResult:
        failures = 0
        for _ in range(trials):
            a = rng.standard_normal((5, 5))
            h = 0.5 * (a + a.T)
            eigenvalues = np.linalg.eigvalsh(h)
            v = rng.standard_normal(5)
            v /= np.linalg.norm(v)
            mean_h = float(v @ h @ v)
            if not mean_h < eigenvalues[1]:
                continue
            bound = temple_lower_bound(mean_h, float(v @ h @ h @ v), float(eigenvalues[1]))
            failures += bound > eigenvalues[0] + 1e-10
        return _invariant('temple_random_matrices', failures == 0, f"{failures} violations in {trials} trials")

    @staticmethod
    def _superadditive_random(rng: np.random.Generator, trials: int = 100) -> InvariantResult:
        failures = 0
        for _ in range(trials):
            size = int(rng.integers(2, 13))
            increments = np.sort(rng.uniform(0.0, 5.0, size))
            energies = np.concatenate(([0.0], np.cumsum(increments)))
            pairs = np.arange(2, size + 1)
            scale = float(np.min(energies[2:] / (pairs * (pairs - 1.0)))) if size >= 2 else 1.0
            N = int(rng.integers(0, size + 1))
            M = int(rng.integers(1, 6))
            result = superadditive_bound(
                energies, M, N, lambda x, c=scale: c * x * max(x - 1.0, 0.0), lambda k: 1.0, 4.0
            )
            failures += not result.holds
        return _invariant('superadditive_random', failures == 0, f"{failures} violations in {trials} trials")

    def run_gp3d(self) -> None:
        g = self.config.crossover_g
        radii = sorted(self.config.crossover_r, reverse=True)
        results = self._map(lambda r: crossover_ratio(r, g * r ** 2 / 4.0, tol=self.config.tol), radii)
        rows = [{'r': res.r, 'a': res.a, 'g': res.g, 'ratio': res.ratio} for res in results]
        (self.out_dir / 'crossover.json').write_text(json.dumps(rows, sort_keys=True, indent=2), encoding='utf-8')
        self.report.profiles_written.append('crossover.json')
        self._write_csv('crossover.csv', [np.array([row[k] for row in rows]) for k in ('r', 'a', 'g', 'ratio')],
                        'r,a,g,ratio')
        self.report.energies = {'crossover': [res.model_dump() for res in results]}

        deviations = [abs(1.0 - res.ratio) for res in results]
        self.report.invariants.extend([
            _invariant('crossover_upper_bound', all(res.upper_bound_holds for res in results)),
            _invariant('crossover_trend', all(b <= a for a, b in zip(deviations, deviations[1:])),
                       f"|1 - ratio| = {', '.join(f'{d:.3g}' for d in deviations)}")
        ])

    def run_e_of_gamma(self) -> None:
        table = self.table_manager.get_table()
        t_lo, t_hi = self.config.t_range
        t = np.geomspace(t_lo, t_hi, self.config.t_points)
        e, de = table.evaluate(t)
        self._write_csv('e_of_gamma.csv', [t, e, de], 't,e,e_prime')
        self.report.energies = {'t_range': [t_lo, t_hi], 'points': int(t.size)}
        self.report.invariants.append(_invariant('e_monotone', bool(np.all(np.diff(e) > 0))))

    # -- driver ------------------------------------------------------------

    def run(self) -> RunReport:
        """Run the configured command and write report.json and metadata.json."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        handlers = {
            'solve': self.run_solve,
            'classify': self.run_classify,
            'sweep': self.run_sweep,
            'oracle': self.run_oracle,
            'gp3d': self.run_gp3d,
            'e-of-gamma': self.run_e_of_gamma
        }
        handlers[self.config.command]()
        payload = self.report.model_dump(mode='json', by_alias=True)
        (self.out_dir / 'report.json').write_text(json.dumps(payload, sort_keys=True, indent=2) + '\n',
                                                  encoding='utf-8')
        metadata = {
            'created': datetime.now(timezone.utc).isoformat(),
            'version': __version__,
            'command': self.config.command,
            'threads': self.config.threads
        }
        (self.out_dir / 'metadata.json').write_text(json.dumps(metadata, indent=2) + '\n', encoding='utf-8')
        return self.report


def report_schema() -> Dict[str, Any]:
    """JSON Schema of report.json as generated from RunReport."""
    return RunReport.model_json_schema()


def load_config(path: Optional[str], overrides: Dict[str, Any]) -> RunConfig:
    """Read a JSON config (if any) and apply command-line overrides."""
    data: Dict[str, Any] = {}
    if path:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    data.update({key: value for key, value in overrides.items() if value is not None})
    return RunConfig.model_validate(data)


def run(config: RunConfig, table_manager: Optional[LLTableManager] = None) -> int:
    """Execute a config and map the outcome to an exit status."""
    try:
        report = Gas1DRunner(config, table_manager).run()
    except PreconditionError as e:
        print(f"❌ Invalid configuration: {e}", flush=True)
        return EXIT_CONFIG
    except (ConvergenceError, MemoryBudgetError) as e:
        print(f"❌ Solver failed: {e}", flush=True)
        return EXIT_SOLVER
    except InvariantViolation as e:
        print(f"❌ Invariant violated: {e}", flush=True)
        return EXIT_INVARIANT
    except Gas1DError as e:
        print(f"❌ {type(e).__name__}: {e}", flush=True)
        return EXIT_SOLVER
    except OSError as e:
        print(f"❌ Cannot write outputs to {config.out_dir}: {e}", flush=True)
        return EXIT_CONFIG

    for item in report.invariants:
        marker = '✓' if item.passed else '❌'
        print(f"{marker} {item.name}" + (f" ({item.detail})" if item.detail else ''), flush=True)
    if not report.all_passed:
        print("⚠ One or more invariants failed", flush=True)
        return EXIT_INVARIANT
    print(f"✓ Outputs written to {config.out_dir}", flush=True)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Command-line interface for the toolkit."""
    parser = argparse.ArgumentParser(
        description='Lieb-Liniger energies, 1D density functionals and regime checks for elongated Bose gases'
    )
    parser.add_argument(
        'command',
        nargs='?',
        choices=['solve', 'classify', 'sweep', 'oracle', 'gp3d', 'e-of-gamma'],
        help='Command to run (default: from the config file)'
    )
    parser.add_argument(
        '--config', '-c',
        help='JSON run configuration'
    )
    parser.add_argument(
        '--out', '-o',
        help='Output directory (default: from config, GAS1D_OUT_DIR or ./runs)'
    )
    parser.add_argument(
        '--threads', '-t',
        type=int,
        help='Worker threads for sweep points (default: from config or GAS1D_THREADS)'
    )
    parser.add_argument(
        '--seed',
        type=int,
        help='Seed for the randomized property checks'
    )
    parser.add_argument(
        '--gnuplot',
        action='store_true',
        default=None,
        help='Also write a gnuplot script next to every CSV'
    )
    parser.add_argument(
        '--write-schema',
        metavar='PATH',
        help='Write the report.json JSON Schema to PATH and exit'
    )

    args = parser.parse_args(argv)
    if args.write_schema:
        Path(args.write_schema).write_text(json.dumps(report_schema(), indent=2) + '\n', encoding='utf-8')
        print(f"✓ Schema written to {args.write_schema}", flush=True)
        return EXIT_OK

    logging.basicConfig(
        level=os.getenv('GAS1D_LOG_LEVEL', 'WARNING').upper(),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s'
    )

    overrides = {
        'command': args.command,
        'out_dir': args.out,
        'threads': args.threads,
        'seed': args.seed,
        'gnuplot': args.gnuplot
    }
    try:
        config = load_config(args.config, overrides)
    except FileNotFoundError as e:
        print(f"❌ Config file not found: {e.filename}", flush=True)
        return EXIT_CONFIG
    except json.JSONDecodeError as e:
        print(f"❌ Config file is not valid JSON: {e}", flush=True)
        return EXIT_CONFIG
    except ValidationError as e:
        print(f"❌ Invalid configuration:\n{e}", flush=True)
        return EXIT_CONFIG

    return run(config)


if __name__ == '__main__':
    sys.exit(main())
