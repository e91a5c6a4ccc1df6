import math

import numpy as np
import pytest

from qploc.errors import IndexOutOfRange
from qploc.lpcore import (INFEASIBLE, OPTIMAL, UNBOUNDED, LpModel, LpSession, read_lp, solve,
                          write_lp)
from qploc.oracle import lp_vertex_oracle

METHODS = ["highs", "simplex"]


def random_lp(rng, nvars, nrows, sense="min", feasible=True):
    """Random bounded LP; with ``feasible`` every row passes through one shared point."""
    m = LpModel(sense)
    x = m.add_variables(nvars, lb=0.0, ub=rng.integers(1, 6, nvars).astype(float),
                        obj=rng.integers(-5, 6, nvars).astype(float))
    shared = rng.random(nvars) * np.array(m.ub)
    for _ in range(nrows):
        coef = rng.integers(-4, 5, nvars).astype(float)
        s = rng.choice(["L", "G", "E"], p=[0.45, 0.45, 0.1])
        point = shared if feasible else rng.random(nvars) * np.array(m.ub)
        rhs = float(coef @ point) if feasible else float(np.round(coef @ point))
        m.add_row(x, coef, s, rhs)
    return m


def dual_objective(model, res):
    """Dual value of a bounded LP: y.b plus the bound terms of the reduced costs."""
    A, senses, rhs = model.matrix()
    lb, ub = model.bounds_arrays()
    rc = res.reduced_costs
    bound = np.where(model_sign(model) * rc > 0, lb, ub)
    bound = np.where(np.abs(rc) < 1e-12, 0.0, bound)
    return float(res.duals @ rhs + rc @ bound)


def model_sign(model):
    return 1.0 if model.sense == "min" else -1.0


@pytest.mark.parametrize("method", METHODS)
def test_single_bound_row(method):
    m = LpModel()
    x = m.add_variable(obj=1.0)
    m.add_row([x], [1.0], "G", 3.0)
    res = solve(m, method=method)
    assert res.status == OPTIMAL
    assert res.x[0] == pytest.approx(3.0)
    assert res.duals[0] == pytest.approx(1.0)


@pytest.mark.parametrize("method", METHODS)
def test_infeasible_pair(method):
    m = LpModel()
    x = m.add_variable(obj=1.0)
    m.add_row([x], [1.0], "L", 1.0)
    m.add_row([x], [1.0], "G", 2.0)
    assert solve(m, method=method).status == INFEASIBLE


@pytest.mark.parametrize("method", METHODS)
def test_unbounded(method):
    m = LpModel("max")
    x = m.add_variable(obj=1.0)
    m.add_row([x], [1.0], "G", 0.0)
    assert solve(m, method=method).status == UNBOUNDED


@pytest.mark.parametrize("method", METHODS)
def test_random_lps_match_vertex_enumeration(method):
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 20:
        nv = int(rng.integers(2, 7))
        m = random_lp(rng, nv, int(rng.integers(1, 7)), sense=rng.choice(["min", "max"]),
                      feasible=bool(rng.random() < 0.7))
        expected = lp_vertex_oracle(m)
        res = solve(m, method=method)
        if math.isinf(expected):
            assert res.status == INFEASIBLE
            continue
        assert res.status == OPTIMAL
        assert res.objective == pytest.approx(expected, rel=1e-7, abs=1e-7)
        assert m.max_violation(res.x) <= 1e-7
        checked += 1


@pytest.mark.parametrize("method", METHODS)
def test_strong_duality_on_twelve_by_twelve(method):
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = random_lp(rng, 12, 12)
        res = solve(m, method=method)
        if res.status != OPTIMAL:
            continue
        assert dual_objective(m, res) == pytest.approx(res.objective, rel=1e-7, abs=1e-7)


def test_methods_agree_on_larger_lps():
    rng = np.random.default_rng(8)
    for _ in range(20):
        m = random_lp(rng, 12, 12, sense=rng.choice(["min", "max"]))
        a, b = solve(m), solve(m, method="simplex")
        assert a.status == b.status
        if a.optimal:
            assert a.objective == pytest.approx(b.objective, rel=1e-7, abs=1e-7)


def test_redundant_row_keeps_optimum():
    rng = np.random.default_rng(1)
    m = random_lp(rng, 6, 5)
    before = solve(m)
    assert before.optimal
    m.add_row(np.arange(6), np.ones(6), "L", float(np.sum(m.ub)) + 1.0)
    assert solve(m).objective == pytest.approx(before.objective)


def test_fix_then_unfix_restores_optimum():
    rng = np.random.default_rng(3)
    m = random_lp(rng, 6, 4)
    base = solve(m)
    basic = int(np.argmax((base.x > 1e-6) & (base.x < np.array(m.ub) - 1e-6)))
    m.fix_variable(basic, 0.0)
    probe = solve(m)
    assert probe.status == INFEASIBLE or probe.objective >= base.objective - 1e-9
    m.unfix_variable(basic)
    assert solve(m).objective == pytest.approx(base.objective)


def test_restriction_never_improves():
    rng = np.random.default_rng(4)
    for _ in range(10):
        m = random_lp(rng, 6, 4)
        base = solve(m)
        if not base.optimal:
            continue
        for j in range(6):
            m.fix_variable(j, 1.0)
            probe = solve(m)
            m.unfix_variable(j)
            assert probe.status == INFEASIBLE or probe.objective >= base.objective - 1e-9


def test_added_cut_never_decreases_min():
    rng = np.random.default_rng(9)
    m = random_lp(rng, 8, 5)
    prev = solve(m).objective
    for _ in range(10):
        coef = rng.integers(0, 4, 8).astype(float)
        m.add_row(np.arange(8), coef, "G", float(rng.integers(0, 8)))
        res = solve(m)
        if res.status == INFEASIBLE:
            break
        assert res.objective >= prev - 1e-9
        prev = res.objective


def test_repeated_solves_are_identical():
    rng = np.random.default_rng(10)
    m = random_lp(rng, 10, 8)
    a, b = solve(m, method="simplex"), solve(m, method="simplex")
    assert np.array_equal(a.x, b.x) and a.objective == b.objective


def test_bad_indices():
    m = LpModel()
    m.add_variable()
    with pytest.raises(IndexOutOfRange):
        m.fix_variable(3, 1.0)
    with pytest.raises(IndexOutOfRange):
        m.add_row([0, 1], [1, 1], "L", 1)


def test_session_tracks_model_edits():
    rng = np.random.default_rng(11)
    m = random_lp(rng, 8, 6)
    session = LpSession(m)
    for step in range(30):
        action = step % 3
        if action == 0:
            m.add_row(np.arange(8), rng.integers(0, 3, 8).astype(float), "L",
                      float(rng.integers(5, 30)))
        elif action == 1 and m.num_rows > 2:
            m.remove_rows([int(rng.integers(0, m.num_rows))])
        else:
            j = int(rng.integers(0, 8))
            m.fix_variable(j, 0.0) if j not in m._saved else m.unfix_variable(j)
        a, b = session.solve(), solve(m)
        assert a.status == b.status
        if a.optimal:
            assert a.objective == pytest.approx(b.objective, rel=1e-9, abs=1e-9)
            assert dual_objective(m, a) == pytest.approx(a.objective, rel=1e-7, abs=1e-7)


def test_lp_text_round_trip():
    rng = np.random.default_rng(12)
    m = random_lp(rng, 5, 4, sense="max")
    text = write_lp(m)
    back = read_lp(text)
    assert back.num_vars == 5 and back.num_rows == 4 and back.sense == "max"
    assert solve(back).objective == pytest.approx(solve(m).objective)
