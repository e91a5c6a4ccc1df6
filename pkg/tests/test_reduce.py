import math

import numpy as np
import pytest

from qploc.benders import BendersParams, MasterState, root_loop
from qploc.errors import InfeasibleInstance
from qploc.instance import DenseQuad
from qploc.oracle import enumerate_optimal
from qploc.reduce import _probe, beats_incumbent, eliminate, partial_enumeration

from conftest import VARIANT_NAMES, make_instance


def solved_state(inst, **kw):
    state = MasterState(inst, BendersParams(**kw))
    state.solve_lp()
    state.lb = state.result.objective
    return state


def test_no_incumbent_means_no_reduction():
    state = solved_state(make_instance(6, 0, "chlpsa"))
    assert math.isinf(state.ub)
    assert eliminate(state) == set()
    assert partial_enumeration(state, "PE0") == set()
    assert partial_enumeration(state, "PE1") == set()


def test_proven_bound_closes_every_positive_reduced_cost():
    state = solved_state(make_instance(6, 1, "uhlpsa"))
    res = state.result
    state.ub = res.objective
    diag = [int(state.z[k, k]) for k in range(6)]
    expected = {k for k, j in enumerate(diag)
                if res.x[j] <= 1e-9 and res.reduced_costs[j] > 1e-6 * abs(state.ub)}
    assert expected
    assert eliminate(state) == expected
    assert state.eliminated == expected


def test_zero_reduced_costs_remove_nothing():
    inst = make_instance(5, 2, "uhlpsa")
    inst = inst.replace(f=np.zeros(5), c=np.zeros((5, 5)), q=DenseQuad.zeros(5))
    state = solved_state(inst)
    state.ub = 0.0
    assert not np.any(state.result.reduced_costs[:25])
    assert eliminate(state) == set()


def test_infeasible_opening_is_closed():
    inst = make_instance(5, 3, "chlpsa")
    d = inst.d.copy()
    d[2] = inst.b[2] + 5.0
    b = inst.b.copy()
    b[[0, 1, 3, 4]] += 100.0
    inst = inst.replace(d=d, b=b)
    state = solved_state(inst)
    state.ub = 1e9
    assert _probe(state, 2, 1.0) == math.inf
    assert 2 in partial_enumeration(state, "PE0")
    assert 2 in state.eliminated


def test_probes_leave_the_master_untouched():
    state = solved_state(make_instance(6, 4, "cphmpsa", p=2))
    before = state.result.objective
    bounds = state.model.bounds_arrays()
    state.ub = 1e12
    assert partial_enumeration(state, "PE0") == set()
    assert partial_enumeration(state, "PE1") == set()
    after = state.raw_solve().objective
    assert after == pytest.approx(before, rel=1e-12)
    assert all(np.array_equal(a, b) for a, b in zip(bounds, state.model.bounds_arrays()))


def test_threshold_margin():
    assert not beats_incumbent(100.00005, 100.0)
    assert beats_incumbent(100.001, 100.0)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("variant", VARIANT_NAMES)
def test_reductions_keep_every_optimum(seed, variant):
    inst = make_instance(6, 300 + seed, variant, p=2)
    try:
        _, opt, pool = enumerate_optimal(inst)
    except InfeasibleInstance:
        return
    state = root_loop(inst, BendersParams(eps_cut=1e-3, kappa=0.0))
    assert state.ub >= opt - 1e-9 * opt
    for sol in pool:
        assert not set(sol.open) & state.eliminated
        assert state.fixed_open <= set(sol.open)
    sizes = [row["eliminated"] for row in state.log]
    assert sizes == sorted(sizes)


def test_pe_with_optimal_incumbent_is_consistent():
    for seed in range(8):
        inst = make_instance(6, 400 + seed, "cphmpsa", p=2)
        try:
            best, opt, pool = enumerate_optimal(inst)
        except InfeasibleInstance:
            continue
        state = solved_state(inst)
        state.offer(best)
        for mode in ("PE1", "PE0"):
            partial_enumeration(state, mode)
        for sol in pool:
            assert not set(sol.open) & state.eliminated
            assert state.fixed_open <= set(sol.open)
