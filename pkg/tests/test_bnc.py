import itertools
import math

import numpy as np
import pytest

from qploc.bnc import BnbNode, SolveParams, solve, solve_milp
from qploc.errors import InfeasibleInstance, InfeasibleSolution, TimeLimit
from qploc.instance import DenseQuad, Instance, Solution, check_solution, evaluate
from qploc.lpcore import LpModel
from qploc.lpcore import solve as lp_solve
from qploc.oracle import enumerate_optimal

from conftest import VARIANT_NAMES, make_instance

WEAK_ROOT = SolveParams(heuristic=False, eliminate=False, partial=False, eps_cut=1e9,
                        record_pruned=True)


def test_pure_lp_equals_lpcore():
    rng = np.random.default_rng(0)
    m = LpModel("max")
    x = m.add_variables(6, ub=3.0, obj=rng.random(6))
    m.add_row(x, rng.random(6), "L", 2.0)
    res = solve_milp(m, [])
    assert res.status == "optimal" and res.nodes == 1
    assert res.objective == pytest.approx(lp_solve(m).objective)


@pytest.mark.parametrize("seed", range(5))
def test_knapsack_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    w = rng.integers(1, 20, 10).astype(float)
    v = rng.integers(1, 30, 10).astype(float)
    cap = float(w.sum() // 2)
    m = LpModel("max")
    x = m.add_variables(10, ub=1.0, obj=v)
    m.add_row(x, w, "L", cap)
    best = max(float(v @ np.array(bits)) for bits in itertools.product((0, 1), repeat=10)
               if w @ np.array(bits) <= cap)
    res = solve_milp(m, x, node_limit=10**6, time_limit=60)
    assert res.proven
    assert res.objective == pytest.approx(best)


def test_infeasible_binary_model():
    m = LpModel()
    x = m.add_variables(3, ub=1.0, obj=1.0)
    m.add_row(x, 2.0, "E", 3.0)
    assert solve_milp(m, x).status == "infeasible"


def test_node_fixings_must_agree():
    BnbNode(0.0, 0, 1, ((3, 1.0), (3, 1.0)))
    with pytest.raises(ValueError):
        BnbNode(0.0, 0, 1, ((3, 1.0), (3, 0.0)))


def test_single_node_instance():
    inst = Instance(f=[5.0], b=[1.0], d=[1.0], c=[[0.0]], q=DenseQuad.zeros(1), p=1)
    sol, status, stats = solve(inst)
    assert sol.assign == (0,) and status == "optimal" and stats["Opt"] == 5.0


def test_integral_root_needs_no_branching():
    inst = make_instance(6, 1, "uhlpsa").replace(f=np.zeros(6), q=DenseQuad.zeros(6))
    sol, status, stats = solve(inst)
    assert status == "optimal" and stats["BB nodes"] == 0
    assert stats["Opt"] == 0.0


@pytest.mark.parametrize("variant", VARIANT_NAMES)
def test_matches_oracle_on_twenty_seeds(variant):
    for seed in range(20):
        inst = make_instance(6, 500 + seed, variant, p=2)
        try:
            _, expected, _ = enumerate_optimal(inst)
        except InfeasibleInstance:
            with pytest.raises(InfeasibleInstance):
                solve(inst)
            continue
        sol, status, stats = solve(inst)
        check_solution(inst, sol)
        assert status == "optimal"
        assert evaluate(inst, sol).total == pytest.approx(expected, rel=1e-9)
        assert stats["LB"] <= stats["UB"] + 1e-9


def test_weak_root_tree_matches_oracle():
    for seed in range(6):
        inst = make_instance(6, 600 + seed, VARIANT_NAMES[seed % 4], p=2)
        try:
            _, expected, _ = enumerate_optimal(inst)
        except InfeasibleInstance:
            continue
        sol, status, stats = solve(inst, WEAK_ROOT)
        assert status == "optimal" and stats["BB nodes"] > 0
        assert evaluate(inst, sol).total == pytest.approx(expected, rel=1e-9)


def _consistent_solutions(inst, fixings):
    n = inst.n
    for a in itertools.product(range(n), repeat=n):
        sol = Solution(a)
        try:
            check_solution(inst, sol)
        except InfeasibleSolution:
            continue
        z = sol.to_z().ravel()
        if all(z[var] == value for var, value in fixings):
            yield sol


@pytest.mark.parametrize("variant", VARIANT_NAMES)
def test_pruned_nodes_hold_nothing_better(variant):
    inst = make_instance(5, 700, variant, p=2)
    try:
        enumerate_optimal(inst)
    except InfeasibleInstance:
        pytest.skip("instance has no feasible assignment")
    _, _, stats = solve(inst, WEAK_ROOT)
    assert stats["pruned"]
    for fixings, bound, why in stats["pruned"]:
        values = [evaluate(inst, s).total for s in _consistent_solutions(inst, fixings)]
        if why == "infeasible":
            assert not values
        elif values:
            assert min(values) >= bound - 1e-6 * max(1.0, abs(bound))


def test_node_limit_reports_gap():
    inst = make_instance(7, 800, "cphmpsa", p=3)
    params = SolveParams(heuristic=True, eliminate=False, partial=False, eps_cut=1e9, node_limit=1)
    sol, status, stats = solve(inst, params)
    check_solution(inst, sol)
    assert status in ("node_limit", "optimal")
    assert stats["LB"] <= stats["UB"] + 1e-9
    if status == "node_limit":
        assert stats["gap(%)"] >= 0


def test_time_limit_returns_incumbent_or_raises():
    inst = make_instance(8, 900, "chlpsa")
    try:
        sol, status, stats = solve(inst, SolveParams(time_limit=0.0))
    except TimeLimit:
        return
    assert status == "time_limit"
    check_solution(inst, sol)
    assert stats["LB"] <= stats["UB"] + 1e-9


def test_stats_columns():
    _, _, stats = solve(make_instance(6, 3, "cphmpsa", p=2))
    for key in ("time(s)", "%Dev heur", "%fixed plants", "%time root", "BB nodes"):
        assert key in stats
    assert stats["%Dev heur"] >= 0 and 0 <= stats["%fixed plants"] <= 100
    assert math.isfinite(stats["root LB"]) and stats["root LB"] <= stats["Opt"] + 1e-9
