import itertools

import numpy as np
import pytest

from qploc.benders import (BendersParams, MasterState, core_eps_bound, make_core_point, root_loop,
                           update_separation_point)
from qploc.errors import InvalidCardinality
from qploc.instance import DenseQuad, Solution
from qploc.rlt import lp_bound

from conftest import VARIANT_NAMES, make_instance

CONVERGED = dict(eps_cut=1e-6, kappa=0.0, heuristic=False, eliminate=False, partial=False)


def test_core_point_formula():
    cp = make_core_point(range(4), 2, eps=0.1)
    assert np.allclose(np.diag(cp.z), 0.4)
    off = cp.z[~np.eye(4, dtype=bool)]
    assert np.allclose(off, 0.2)
    assert np.allclose(cp.z.sum(axis=1), 1.0)


@pytest.mark.parametrize("h,p", [(2, 2), (3, 2), (5, 3), (8, 2), (8, 7), (4, 1), (6, 1)])
def test_core_point_identities(h, p):
    n = h + 3
    H = list(range(1, h + 1))
    cp = make_core_point(H, p, n)
    z = cp.z
    assert np.allclose(z.sum(axis=1), 1.0)
    assert np.trace(z) == pytest.approx(min(p, h) - h * cp.eps)
    assert np.trace(z) < p
    outside = [k for k in range(n) if k not in H]
    assert not z[:, outside].any()
    assert np.all((z[:, H] > 0) & (z[:, H] < 1))
    if p >= 2:
        # relaxed linking rows hold strictly
        for i in range(n):
            for k in H:
                if i != k:
                    assert z[i, k] < z[k, k]


def test_core_point_errors():
    with pytest.raises(InvalidCardinality):
        make_core_point([], 2)
    with pytest.raises(InvalidCardinality):
        make_core_point(range(4), 2, eps=core_eps_bound(4, 2))
    assert core_eps_bound(2, 2) == 0.5


def test_single_candidate_core_point_is_point_mass():
    z = make_core_point([2], 3, 4).z
    assert np.array_equal(z[:, 2], np.ones(4))


def test_separation_point_update():
    rng = np.random.default_rng(0)
    zbar = rng.random((5, 5))
    zbar /= zbar.sum(axis=1, keepdims=True)
    assert np.allclose(update_separation_point(zbar, zbar, 0.3), zbar)
    zhat = np.eye(5)
    out = update_separation_point(zhat, np.zeros((5, 5)), 0.5)
    assert out[0, 0] == 0.5
    for _ in range(10):
        a, b = rng.random((5, 5)), rng.random((5, 5))
        a /= a.sum(axis=1, keepdims=True)
        b /= b.sum(axis=1, keepdims=True)
        assert np.allclose(update_separation_point(a, b, rng.uniform(0.01, 0.99)).sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        update_separation_point(a, b, 1.0)


def test_zero_interaction_root():
    inst = make_instance(6, 1, "chlpsa").replace(q=DenseQuad.zeros(6))
    state = root_loop(inst, BendersParams(**CONVERGED))
    assert state.iteration <= 2
    assert state.eta_value() == 0.0
    assert state.lb == pytest.approx(lp_bound(inst, ()), rel=1e-9)


@pytest.mark.parametrize("variant", VARIANT_NAMES)
def test_converged_root_matches_rl2(variant):
    inst = make_instance(6, 31, variant, p=2)
    state = root_loop(inst, BendersParams(**CONVERGED))
    rl2 = lp_bound(inst, "RL2")
    assert state.lb == pytest.approx(rl2, rel=1e-6)


def test_bound_never_decreases_and_cuts_are_violated():
    inst = make_instance(7, 5, "cphmpsa", p=3)
    params = BendersParams(eps_cut=1e-3, kappa=0.0, heuristic=True)
    state = MasterState(inst, params)
    added = []
    original = state.add_cut

    def spy(cut):
        violation = cut.evaluate(state.zbar()) - state.eta_value()
        added.append(violation)
        return original(cut)

    state.add_cut = spy
    root_loop(inst, params, state)
    lbs = [row["LB"] for row in state.log]
    assert all(b >= a - 1e-9 for a, b in zip(lbs, lbs[1:]))
    assert added and min(added) > params.eps_cut
    assert all(row["LB"] <= row["UB"] + 1e-6 * abs(row["UB"]) for row in state.log)


def test_cuts_from_stabilized_points_are_globally_valid():
    inst = make_instance(5, 6, "uhlpsa")
    state = root_loop(inst, BendersParams(eps_cut=1e-6, kappa=0.0, heuristic=False,
                                          eliminate=False, partial=False))
    assert state.cuts
    for a in itertools.product(range(5), repeat=5):
        if any(a[a[i]] != a[i] for i in range(5)):
            continue
        z = Solution(a).to_z()
        quad = inst.q.total(np.array(a))
        for cut in state.cuts:
            assert cut.evaluate(z) <= quad + 1e-9 * max(1.0, quad)


def test_closing_a_facility_resets_core_point():
    inst = make_instance(6, 7, "chlpsa")
    state = MasterState(inst)
    state.close_facility(2)
    state.close_facility(4)
    assert not state.zhat[:, [2, 4]].any()
    assert np.all(state.zhat[:, [0, 1, 3, 5]] > 0)
    assert state.candidates == (0, 1, 3, 5)


def test_iteration_log_fields():
    state = root_loop(make_instance(5, 8, "cphmpsa", p=2))
    assert set(state.log[-1]) == {"iter", "LB", "UB", "cuts", "eliminated", "fixed", "time"}
