"""Two-phase matheuristic.

1. ``constructive``: solve the linear facility location MILP (interaction
   costs dropped) restricted to the facilities in the LP support, then
   evaluate its solution under the full objective.
2. ``vnd``: variable neighborhood descent over shift, swap, open, close and
   exchange moves, followed by ``gap_intensify``, which re-optimizes all
   assignments for the open set as a generalized assignment problem and
   polishes the result with shift and swap moves.
"""
from __future__ import annotations

import math
import time

import numpy as np

from ._formulation import add_location_constraints
from .bnc import solve_milp
from .errors import GapInfeasible, RlfInfeasible
from .instance import Instance, Solution, evaluate
from .lpcore import LpModel

NEIGHBORHOODS = ("N1", "N2", "N3", "N4", "N5")


def _improves(delta, ref):
    return delta < -1e-9 * max(1.0, abs(ref))


# ---------------------------------------------------------------------------
# constructive phase
# ---------------------------------------------------------------------------

def rlf_model(inst: Instance, support):
    """Linear facility location MILP over the columns in ``support``; returns ``(model, z)``."""
    n = inst.n
    cols = sorted(int(k) for k in support)
    model = LpModel("min", name="rlf")
    z = -np.ones((n, n), dtype=np.int64)
    for i in range(n):
        for k in cols:
            cost = inst.c[i, k] + (inst.f[k] if i == k else 0.0)
            z[i, k] = model.add_variable(0.0, 1.0, cost, name=f"z_{i}_{k}")
    add_location_constraints(model, inst, z, columns=cols)
    return model, z


def _solution_from_milp(x, z):
    n = z.shape[0]
    assign = []
    for i in range(n):
        cols = np.flatnonzero(z[i] >= 0)
        vals = x[z[i, cols]]
        assign.append(int(cols[np.argmax(vals)]))
    return Solution(assign)


def greedy_assign(inst: Instance, facilities, order=None):
    """Assign every non-facility node to its cheapest facility with room, largest demand first."""
    n = inst.n
    H = sorted(facilities)
    a = np.full(n, -1, dtype=np.int64)
    room = {k: (inst.bbar[k] if inst.capacitated else math.inf) for k in H}
    if any(v < 0 for v in room.values()):
        return None
    for k in H:
        a[k] = k
    order = order if order is not None else sorted((i for i in range(n) if a[i] < 0),
                                                  key=lambda i: (-inst.d[i], i))
    for i in order:
        best = None
        for k in H:
            if room[k] >= inst.d[i] and (best is None or inst.c[i, k] < inst.c[i, best]):
                best = k
        if best is None:
            return None
        a[i] = best
        room[best] -= inst.d[i]
    return Solution(a)


def _greedy_rlf(inst, support):
    """Open the cheapest support facilities until the demand fits, then assign greedily."""
    cand = sorted(support, key=lambda k: (inst.f[k], k))
    for h in range(1, min(inst.p, len(cand)) + 1):
        sol = greedy_assign(inst, cand[:h])
        if sol is not None:
            return sol
    return None


def constructive(inst: Instance, support, node_limit=5000, time_limit=5.0) -> Solution:
    """Optimal (or best found) RLF solution on ``support``; raises :class:`RlfInfeasible`."""
    support = sorted(int(k) for k in support)
    if not support:
        raise RlfInfeasible("empty support")
    model, z = rlf_model(inst, support)
    res = solve_milp(model, z[z >= 0], node_limit=node_limit, time_limit=time_limit)
    if res.has_solution:
        return _solution_from_milp(res.x, z)
    sol = _greedy_rlf(inst, support)
    if sol is None:
        raise RlfInfeasible(f"support {support} cannot serve all demand")
    return sol


# ---------------------------------------------------------------------------
# local search
# ---------------------------------------------------------------------------

class LocalState:
    """Assignment vector with available capacities ``h[k] = b[k] - sum(d[a == k])``."""

    def __init__(self, inst: Instance, sol: Solution, check=False):
        self.inst = inst
        self.a = sol.as_array().copy()
        self.cap = inst.b if inst.capacitated else np.full(inst.n, math.inf)
        self.h = self._fresh_h()
        self.cost = evaluate(inst, sol).total
        self.check = check

    def _fresh_h(self):
        load = np.bincount(self.a, weights=self.inst.d, minlength=self.inst.n)
        return np.where(self.a == np.arange(self.inst.n), self.cap - load, 0.0)

    @property
    def H(self):
        return [int(k) for k in np.flatnonzero(self.a == np.arange(len(self.a)))]

    def solution(self):
        return Solution(self.a)

    def set(self, a, cost):
        self.a = np.asarray(a, dtype=np.int64).copy()
        self.h = self._fresh_h()
        self.cost = cost
        self.verify()

    def shift(self, i, k, delta):
        r = self.a[i]
        self.h[r] += self.inst.d[i]
        self.h[k] -= self.inst.d[i]
        self.a[i] = k
        self.cost += delta
        self.verify()

    def verify(self):
        if not self.check:
            return
        fresh = self._fresh_h()
        H = self.H
        assert np.allclose(self.h[H], fresh[H]), "available capacity bookkeeping drifted"
        total = evaluate(self.inst, self.solution()).total
        assert abs(total - self.cost) <= 1e-7 * max(1.0, abs(total)), "objective bookkeeping drifted"

    def full_cost(self, a):
        return evaluate(self.inst, Solution(a), check=False).total


def _move_delta(inst, a, i, k, nc):
    r = a[i]
    return inst.c[i, k] - inst.c[i, r] + nc[k] - nc[r]


def _n1_shift(st: LocalState):
    inst, a = st.inst, st.a
    H = st.H
    Hset = set(H)
    for j in range(inst.n):
        if j in Hset:
            continue
        nc = inst.q.node_costs(a, j)
        for i in H:
            if a[j] == i or st.h[i] < inst.d[j]:
                continue
            delta = _move_delta(inst, a, j, i, nc)
            if _improves(delta, st.cost):
                st.shift(j, i, delta)
                return True
    return False


def _n2_swap(st: LocalState):
    inst, a = st.inst, st.a
    Hset = set(st.H)
    customers = [i for i in range(inst.n) if i not in Hset]
    nc = {i: inst.q.node_costs(a, i) for i in customers}
    for x, i1 in enumerate(customers):
        for i2 in customers[x + 1:]:
            r1, r2 = a[i1], a[i2]
            if r1 == r2:
                continue
            if st.h[r1] + inst.d[i1] < inst.d[i2] or st.h[r2] + inst.d[i2] < inst.d[i1]:
                continue
            q = inst.q
            corr = (q.value(i1, r2, i2, r1) + q.value(i1, r1, i2, r2)
                    - q.value(i1, r2, i2, r2) - q.value(i1, r1, i2, r1))
            d1 = _move_delta(inst, a, i1, r2, nc[i1])
            delta = d1 + _move_delta(inst, a, i2, r1, nc[i2]) + corr
            if _improves(delta, st.cost):
                st.check, check = False, st.check
                st.shift(i1, r2, d1)
                st.check = check
                st.shift(i2, r1, delta - d1)
                return True
    return False


def _by_demand(inst, nodes):
    return sorted(nodes, key=lambda i: (-inst.d[i], i))


def _n3_open(st: LocalState, allowed=None):
    inst = st.inst
    H = st.H
    if len(H) >= inst.p:
        return False
    Hset = set(H)
    for k in range(inst.n):
        if k in Hset or (allowed is not None and k not in allowed):
            continue
        if st.cap[k] < inst.d[k]:
            continue
        a = st.a.copy()
        hh = st.h.copy()
        hh[a[k]] += inst.d[k]
        a[k] = k
        hh[k] = st.cap[k] - inst.d[k]
        for j in _by_demand(inst, [j for j in range(inst.n) if j not in Hset and j != k]):
            if inst.c[j, k] <= inst.c[j, a[j]] and hh[k] >= inst.d[j]:
                hh[a[j]] += inst.d[j]
                hh[k] -= inst.d[j]
                a[j] = k
        cost = st.full_cost(a)
        if _improves(cost - st.cost, st.cost):
            st.set(a, cost)
            return True
    return False


def _n4_close(st: LocalState):
    inst = st.inst
    H = st.H
    if len(H) < 2:
        return False
    for k in H:
        a = st.a.copy()
        hh = st.h.copy()
        rest = [m for m in H if m != k]
        ok = True
        for j in _by_demand(inst, [j for j in range(inst.n) if a[j] == k]):
            best = None
            for m in rest:
                if hh[m] - inst.d[j] >= 0 and (best is None or inst.c[j, m] < inst.c[j, best]):
                    best = m
            if best is None:
                ok = False
                break
            a[j] = best
            hh[best] -= inst.d[j]
        if not ok:
            continue
        cost = st.full_cost(a)
        if _improves(cost - st.cost, st.cost):
            st.set(a, cost)
            return True
    return False


def _n5_exchange(st: LocalState, allowed=None):
    inst = st.inst
    H = st.H
    Hset = set(H)
    total_d = inst.d.sum()
    for i in range(inst.n):
        if i in Hset or (allowed is not None and i not in allowed):
            continue
        for m in H:
            newH = [k for k in H if k != m] + [i]
            if inst.capacitated and st.cap[newH].sum() < total_d:
                continue
            sol = greedy_assign(inst, newH)
            if sol is None:
                continue  # infeasible exchange
            cost = st.full_cost(sol.assign)
            if _improves(cost - st.cost, st.cost):
                st.set(sol.assign, cost)
                return True
    return False


def vnd(inst: Instance, start: Solution, trace=None, neighborhoods=NEIGHBORHOODS, allowed=None,
        check=False, max_moves=100000, deadline=None) -> Solution:
    """First-improvement descent cycling through ``neighborhoods``, restarting at the first on success.

    ``trace`` (a list) receives ``(neighborhood, cost)`` after every accepted move.
    ``deadline`` is a :func:`time.perf_counter` value after which the search stops.
    """
    st = LocalState(inst, start, check=check)
    moves = {
        "N1": _n1_shift,
        "N2": _n2_swap,
        "N3": lambda s: _n3_open(s, allowed),
        "N4": _n4_close,
        "N5": lambda s: _n5_exchange(s, allowed),
    }
    if trace is not None:
        trace.append(("start", st.cost))
    t = 0
    count = 0
    while t < len(neighborhoods) and count < max_moves:
        if deadline is not None and time.perf_counter() > deadline:
            break
        name = neighborhoods[t]
        if moves[name](st):
            count += 1
            if trace is not None:
                trace.append((name, st.cost))
            t = 0
        else:
            t += 1
    return st.solution()


# ---------------------------------------------------------------------------
# assignment intensification
# ---------------------------------------------------------------------------

def gap_model(inst: Instance, H):
    """Generalized assignment MILP with facilities ``H`` fixed open; returns ``(model, z)``."""
    n = inst.n
    H = sorted(H)
    model = LpModel("min", name="gap")
    z = -np.ones((n, n), dtype=np.int64)
    Hset = set(H)
    for i in range(n):
        for k in H:
            fixed = 1.0 if i == k else (0.0 if i in Hset else None)
            lo, up = (fixed, fixed) if fixed is not None else (0.0, 1.0)
            z[i, k] = model.add_variable(lo, up, inst.c[i, k], name=f"z_{i}_{k}")
    for i in range(n):
        model.add_row(z[i, H], 1.0, "E", 1.0, name=f"assign_{i}")
    if inst.capacitated:
        for k in H:
            others = [i for i in range(n) if i != k]
            model.add_row(z[others, k], inst.d[others], "L", inst.bbar[k], name=f"cap_{k}")
    return model, z


def gap_intensify(inst: Instance, solution: Solution, node_limit=5000, time_limit=5.0) -> Solution:
    """Best of ``solution`` and the GAP reassignment (polished by shift/swap) under the full objective."""
    H = solution.open
    if len(H) == 1:
        return solution
    model, z = gap_model(inst, H)
    res = solve_milp(model, z[z >= 0], node_limit=node_limit, time_limit=time_limit)
    if not res.has_solution:
        if res.status == "infeasible":
            raise GapInfeasible(f"facilities {H} cannot serve all demand")
        return solution
    new = _solution_from_milp(res.x, z)
    if new.assign == solution.assign:
        return solution
    new = vnd(inst, new, neighborhoods=("N1", "N2"))
    if evaluate(inst, new).total < evaluate(inst, solution).total:
        return new
    return solution


def _remaining(deadline, cap):
    if deadline is None:
        return cap
    return max(0.0, min(cap, deadline - time.perf_counter()))


def matheuristic(inst: Instance, support, allowed=None, trace=None, deadline=None):
    """Constructive RLF solution on ``support`` improved by VND and GAP; ``None`` if nothing feasible.

    ``deadline`` (a :func:`time.perf_counter` value) caps the MILP time limits and the descent.
    """
    allowed = tuple(range(inst.n)) if allowed is None else tuple(allowed)
    support = [k for k in support if k in allowed] or list(allowed)
    try:
        sol = constructive(inst, support, time_limit=_remaining(deadline, 5.0))
    except RlfInfeasible:
        try:
            sol = constructive(inst, allowed, time_limit=_remaining(deadline, 5.0))
        except RlfInfeasible:
            return None
    sol = vnd(inst, sol, trace=trace, allowed=set(allowed), deadline=deadline)
    if deadline is not None and time.perf_counter() > deadline:
        return sol
    try:
        sol = gap_intensify(inst, sol, time_limit=_remaining(deadline, 5.0))
    except GapInfeasible:
        pass
    return sol
