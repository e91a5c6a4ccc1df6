import numpy as np
import pytest
from hypothesis import given, strategies as st

from qploc.errors import DimensionMismatch, InfeasibleSolution
from qploc.generators import generate_set1, random_instance, set1_class_counts
from qploc.instance import (DenseQuad, FactorizedQuad, Instance, Solution, apply_variant,
                            build_ap_costs, check_solution, evaluate, flow_totals,
                            uncapacitated_capacities)
from qploc.oracle import naive_cost

from conftest import make_instance, random_assignment


def test_single_node_total_is_setup_cost():
    inst = Instance(f=[5.0], b=[1.0], d=[1.0], c=[[0.0]], q=DenseQuad.zeros(1), p=1)
    assert evaluate(inst, Solution([0])).total == 5.0


def test_zero_flow_gives_zero_quadratic_part(rng):
    n = 5
    c, q = build_ap_costs(rng.random((n, n)), np.zeros((n, n)))
    inst = Instance(f=np.ones(n), b=np.full(n, 100.0), d=np.ones(n), c=c, q=q, p=n)
    for _ in range(10):
        a = random_assignment(inst, rng)
        assert evaluate(inst, Solution(a)).quadratic == 0.0


def test_six_nodes_match_naive_summation(rng):
    inst = make_instance(6, 3, "uhlpsa")
    for _ in range(25):
        a = random_assignment(inst, rng)
        br = evaluate(inst, Solution(a))
        assert br.total == pytest.approx(naive_cost(inst, a), rel=1e-12)
        assert br.total == br.setup + br.linear + br.quadratic


def test_invalid_solutions_are_rejected():
    inst = make_instance(4, 0, "cphmpsa", p=1)
    with pytest.raises(InfeasibleSolution, match="not an open facility"):
        evaluate(inst, Solution([1, 2, 2, 2]))
    with pytest.raises(InfeasibleSolution, match="exceed p"):
        evaluate(inst, Solution([0, 1, 1, 1]))
    tight = inst.replace(b=inst.d.copy())
    with pytest.raises(InfeasibleSolution, match="capacity"):
        check_solution(tight, Solution([0, 0, 0, 0]))


def test_dense_accessor_swaps_pair_order():
    inst = make_instance(4, 1)
    q = inst.q
    assert q.value(2, 1, 0, 3) == q.value(0, 3, 2, 1)
    assert q.pair_cost(0, 2)[3, 1] == q.value(0, 3, 2, 1)


def test_ap_costs_zero_distance():
    w = np.ones((4, 4))
    c, q = build_ap_costs(np.zeros((4, 4)), w)
    assert not c.any()
    assert not q.to_dense().slices.any()


def test_ap_costs_single_pair():
    n = 4
    w = np.zeros((n, n))
    w[0, 1] = 4.0
    dist = np.zeros((n, n))
    dist[2, 3] = 10.0
    _, q = build_ap_costs(dist, w, tau=0.75)
    assert q.value(0, 2, 1, 3) == pytest.approx(30.0)


def test_ap_costs_defaults_and_flow_totals(rng):
    n = 7
    w = rng.integers(0, 20, (n, n)).astype(float)
    dist = rng.random((n, n)) * 50
    c, q = build_ap_costs(dist, w)
    assert (q.chi, q.tau, q.delta) == (2.0, 0.75, 3.0)
    out_flow, in_flow = flow_totals(w)
    for i in range(n):
        o = sum(w[i][j] for j in range(n))
        d = sum(w[j][i] for j in range(n))
        assert out_flow[i] == pytest.approx(o)
        assert in_flow[i] == pytest.approx(d)
        for k in range(n):
            assert c[i, k] == pytest.approx((2 * o + 3 * d) * dist[i, k])


def test_ap_costs_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        build_ap_costs(np.zeros((3, 3)), np.zeros((4, 4)))


def test_set1_class_counts_and_ranges():
    inst, classes = generate_set1(100, 7)
    assert [int((classes == k).sum()) for k in ("HL", "ML", "LL")] == [2, 38, 60]
    assert set1_class_counts(100) == (2, 38, 60)
    out_flow = inst.q.w.sum(axis=1)
    for name, (lo, hi) in {"HL": (100, 1000), "ML": (10, 100), "LL": (1, 10)}.items():
        vals = out_flow[classes == name]
        assert vals.min() >= lo and vals.max() <= hi


def test_set1_is_deterministic():
    a, ca = generate_set1(40, 3, "T", "T")
    b, cb = generate_set1(40, 3, "T", "T")
    assert a == b and (ca == cb).all()
    assert not generate_set1(40, 4)[0] == a


def test_set1_needs_ten_nodes():
    with pytest.raises(ValueError):
        generate_set1(9, 0)


@given(seed=st.integers(0, 10_000), node=st.integers(0, 5), target=st.integers(0, 5))
def test_evaluate_is_additive(seed, node, target):
    inst = make_instance(6, seed % 50, "uhlpsa")
    rng = np.random.default_rng(seed)
    a = random_assignment(inst, rng)
    H = sorted(set(a))
    if node in H or target not in H:
        return
    b = a.copy()
    b[node] = target
    delta = inst.c[node, target] - inst.c[node, a[node]]
    for j in range(inst.n):
        if j != node:
            delta += inst.q.value(node, target, j, a[j]) - inst.q.value(node, a[node], j, a[j])
    diff = evaluate(inst, Solution(b)).total - evaluate(inst, Solution(a)).total
    assert diff == pytest.approx(delta, abs=1e-9)


def test_node_costs_match_full_difference(rng):
    inst = make_instance(6, 11, "uhlpsa")
    a = random_assignment(inst, rng)
    for i in range(inst.n):
        by_hand = [sum(inst.q.value(i, k, j, a[j]) for j in range(inst.n) if j != i) for k in range(inst.n)]
        assert np.allclose(inst.q.node_costs(a, i), by_hand)


def test_uncapacitated_equals_loose_capacitated(rng):
    inst = make_instance(6, 5, "uhlpsa")
    loose = inst.replace(capacitated=True, b=uncapacitated_capacities(inst.d))
    for _ in range(20):
        a = Solution(random_assignment(inst, rng))
        assert evaluate(inst, a).total == evaluate(loose, a).total
        check_solution(loose, Solution([0] * inst.n))


def test_variants_configure_fields():
    base = random_instance(6, 2, capacitated=True, p=2)
    assert apply_variant(base, "uhlpsa").p == 6
    assert not apply_variant(base, "uphmpsa", 2).f.any()
    assert apply_variant(base, "cphmpsa", 2).capacitated
    with pytest.raises(ValueError):
        apply_variant(base, "cphmpsa")
    with pytest.raises(ValueError):
        apply_variant(base, "nope")


def test_factorized_matches_dense_copy(rng):
    n = 5
    w = rng.random((n, n))
    dist = rng.random((n, n))
    dist = dist + dist.T
    _, q = build_ap_costs(dist, w)
    dense = q.to_dense()
    a = rng.integers(0, n, n)
    assert dense.total(a) == pytest.approx(q.total(a))
    assert isinstance(q, FactorizedQuad)


def test_solution_z_round_trip():
    sol = Solution([0, 0, 2, 2])
    assert Solution.from_z(sol.to_z()) == sol
    assert sol.open == (0, 2)
    with pytest.raises(InfeasibleSolution):
        Solution.from_z(np.full((2, 2), 0.5))
