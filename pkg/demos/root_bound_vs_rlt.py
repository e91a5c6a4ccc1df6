"""Watch the Benders root bound climb towards the RL2 relaxation, then list all RLT bounds."""
from qploc import apply_variant, random_instance
from qploc.benders import BendersParams, root_loop
from qploc.oracle import enumerate_optimal
from qploc.rlt import lp_bound, percent_gap


def main():
    inst = apply_variant(random_instance(7, seed=3, capacitated=True, p=3), "cphmpsa", p=3)
    params = BendersParams(eps_cut=1e-6, kappa=0.0, heuristic=False, eliminate=False, partial=False)
    state = root_loop(inst, params)
    for row in state.log[:: max(1, len(state.log) // 10)]:
        print(f"iter {row['iter']:4d}  LB {row['LB']:10.4f}  cuts {row['cuts']}")
    _, opt, _ = enumerate_optimal(inst)
    print(f"converged root bound {state.lb:.6f} after {state.iteration} rounds, optimum {opt:.6f}")
    for cfg in ("STD", "RL2", "RL3", "RL4", "RL5", "RL6", "RL7", "RL8", "RL1"):
        bound = lp_bound(inst, cfg)
        print(f"{cfg:4s} bound {bound:10.4f}  gap {percent_gap(opt, bound):6.3f}%")


if __name__ == "__main__":
    main()
