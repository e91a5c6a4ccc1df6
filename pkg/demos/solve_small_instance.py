"""Solve a small random instance in all four variants and check each optimum by brute force."""
from qploc import SolveParams, apply_variant, evaluate, random_instance, solve
from qploc.errors import InfeasibleInstance
from qploc.oracle import enumerate_optimal


def main():
    base = random_instance(7, seed=11, capacitated=True, p=2)
    for variant in ("uhlpsa", "uphmpsa", "chlpsa", "cphmpsa"):
        inst = apply_variant(base, variant, p=2)
        try:
            sol, status, stats = solve(inst, SolveParams())
        except InfeasibleInstance:
            print(f"{variant:8s} infeasible")
            continue
        cost = evaluate(inst, sol)
        _, oracle, _ = enumerate_optimal(inst)
        print(f"{variant:8s} {status:8s} total={cost.total:9.3f} (setup {cost.setup:.2f}, "
              f"linear {cost.linear:.2f}, interaction {cost.quadratic:.2f}) "
              f"oracle={oracle:9.3f} hubs={sol.open} nodes={stats['BB nodes']}")


if __name__ == "__main__":
    main()
