"""Example usage of the elongated Bose gas toolkit."""

from functional import minimize_general, validity_check
from oracles import bc_chain, bethe_ground_state
from regimes import GasParams, classify, continuity_scan, solve_regime
from table_manager import LLTableManager
from transverse3d import crossover_ratio


# Example 1: Classify a trapped gas and solve its regime functional
def example_classify_and_solve():
    """Classify a harmonic trap and compare the regime energy with the general functional."""
    table = LLTableManager().get_table()
    params = GasParams(N=1000, L=1.0, r=0.01, a=1e-5, s=2.0)

    report = classify(params, table=table)
    print(f"Region {report.region} ({report.label}): g={report.g:.4g}, gamma={report.gamma:.4g}")

    solution = solve_regime(params, table=table)
    profile, breakdown = minimize_general(params.N, params.trap(), report.g, table)
    print(f"Regime energy:  {solution.energy:.8g}")
    print(f"General energy: {breakdown.total:.8g}")
    print(f"Validity passed: {validity_check(params, profile, table).passed}")


# Example 2: Hard-wall box
def example_hard_wall():
    """Uniform-box limit; N/L fixes the density directly."""
    table = LLTableManager().get_table()
    params = GasParams(N=50, L=1.0, r=0.01, a=1e-3, s='hard-wall')
    solution = solve_regime(params, table=table)
    print(f"Hard wall, region {solution.region}: E = {solution.energy:.8g}")


# Example 3: Few-body oracles
def example_oracles():
    """Bethe ansatz and grid energies for two particles in a unit box."""
    state = bethe_ground_state(2, 1.0, 5.0)
    record = bc_chain(2, 1.0, 5.0)
    print(f"Bethe periodic energy: {state.energy:.10g}")
    print(f"E_N={record.E_N:.6g} <= E_p={record.E_p:.6g} <= E_D={record.E_D:.6g}: {record.ok}")


# Example 4: 3D crossover
def example_crossover():
    """Ratio of the 3D GP energy to N e_perp / r^2 + E_GP for a thin cylinder."""
    result = crossover_ratio(r=0.05, a=0.05 ** 2 / 4.0)
    print(f"r={result.r}: ratio={result.ratio:.6f} (upper bound holds: {result.upper_bound_holds})")


# Example 5: Continuity across region boundaries
def example_continuity():
    """Energy gaps between neighbouring regime formulas along a sweep in a."""
    table = LLTableManager().get_table()
    points = [GasParams(N=1000, L=1.0, r=0.01, a=a) for a in (1e-9, 1e-7, 1e-5, 1e-3)]
    for point in continuity_scan(points, table):
        print(point.model_dump())


if __name__ == '__main__':
    print("Elongated Bose Gas Toolkit - Example Usage")
    print("=" * 50)
    print("\nUncomment the example you want to run:\n")

    # example_classify_and_solve()
    # example_hard_wall()
    # example_oracles()
    # example_crossover()
    # example_continuity()
