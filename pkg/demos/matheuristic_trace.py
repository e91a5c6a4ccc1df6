"""Follow the matheuristic's descent on a generated hub network."""
from qploc import evaluate, generate_set1
from qploc.benders import MasterState, _support
from qploc.errors import RlfInfeasible
from qploc.matheur import constructive, matheuristic


def main():
    inst, _ = generate_set1(40, seed=2, setup="L", capacity="T", capacitated=True)
    state = MasterState(inst)
    state.solve_lp()
    support = _support(state.zbar())
    print(f"LP bound {state.result.objective:,.2f}, support of the LP point: {len(support)} facilities")
    try:
        start = constructive(inst, support)
    except RlfInfeasible as exc:
        # heavy nodes that no other hub can absorb must be hubs themselves
        print(f"support too small ({exc}); widening to all nodes")
        support = range(inst.n)
        start = constructive(inst, support)
    print(f"constructive solution {evaluate(inst, start).total:,.2f} with hubs {start.open}")
    trace = []
    best = matheuristic(inst, support, trace=trace)
    for name, cost in trace:
        print(f"  {name:5s} {cost:,.2f}")
    print(f"after GAP intensification {evaluate(inst, best).total:,.2f} with hubs {best.open}")


if __name__ == "__main__":
    main()
