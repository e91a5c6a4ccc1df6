"""Brute-force reference solvers.

Deliberately naive and independent of the solver code paths: the location
oracle expands the interaction costs into a plain nested list through the
scalar accessor ``q.value`` and evaluates everything with Python loops; the
LP oracle enumerates vertices by solving every square system of tight
constraints.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import InfeasibleInstance, SizeGuard
from .instance import Instance, Solution

ORACLE_MAX_N = 10


def naive_tables(inst: Instance):
    """``(f, c, d, cap, Q)`` as lists; ``Q[i][k][j][m]`` for ``i < j``, zero elsewhere."""
    n = inst.n
    Q = [[[[0.0] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(n):
                for m in range(n):
                    Q[i][k][j][m] = inst.q.value(i, k, j, m)
    f = [float(v) for v in inst.f]
    c = [[float(v) for v in row] for row in inst.c]
    d = [float(v) for v in inst.d]
    cap = [float(inst.b[k] - inst.d[k]) if inst.capacitated else math.inf for k in range(n)]
    return f, c, d, cap, Q


def naive_cost(inst: Instance, assign, tables=None):
    """Objective of an assignment vector by explicit summation over all pairs ``i < j``."""
    f, c, d, cap, Q = tables or naive_tables(inst)
    n = len(assign)
    total = 0.0
    for k in range(n):
        if assign[k] == k:
            total += f[k]
    for i in range(n):
        total += c[i][assign[i]]
    for i in range(n):
        for j in range(i + 1, n):
            total += Q[i][assign[i]][j][assign[j]]
    return total


def enumerate_optimal(inst: Instance, rtol=1e-9):
    """Exhaustive optimum: ``(best Solution, value, list of all optimal Solutions)``.

    Every open set ``H`` with ``1 <= |H| <= p`` is tried and the remaining
    nodes are assigned recursively, pruning on residual capacity.
    """
    n = inst.n
    if n > ORACLE_MAX_N:
        raise SizeGuard(f"oracle limited to n <= {ORACLE_MAX_N}, got n={n}")
    f, c, d, cap, Q = naive_tables(inst)
    best = math.inf
    pool = []

    def tol(v):
        return rtol * max(1.0, abs(v))

    for h in range(1, inst.p + 1):
        for H in itertools.combinations(range(n), h):
            if any(cap[k] < -1e-12 for k in H):
                continue
            assign = [-1] * n
            base = 0.0
            for k in H:
                assign[k] = k
                base += f[k] + c[k][k]
            for a_idx, k in enumerate(H):
                for m in H[a_idx + 1:]:
                    base += Q[k][k][m][m]
            rest = [i for i in range(n) if i not in H]
            room = {k: cap[k] for k in H}

            def extend(pos, cost):
                nonlocal best, pool
                if pos == len(rest):
                    if cost < best - tol(best):
                        best = cost
                        pool = [tuple(assign)]
                    elif abs(cost - best) <= tol(best):
                        pool.append(tuple(assign))
                    return
                i = rest[pos]
                for k in H:
                    if d[i] > room[k] + 1e-9:
                        continue
                    add = c[i][k]
                    for j in range(n):
                        if j == i or assign[j] < 0:
                            continue
                        add += Q[i][k][j][assign[j]] if i < j else Q[j][assign[j]][i][k]
                    assign[i] = k
                    room[k] -= d[i]
                    extend(pos + 1, cost + add)
                    room[k] += d[i]
                    assign[i] = -1

            extend(0, base)
    if not pool:
        raise InfeasibleInstance("no feasible solution exists")
    # final values recomputed from scratch so the reported optimum has no drift
    values = [naive_cost(inst, a, (f, c, d, cap, Q)) for a in pool]
    best = min(values)
    pool = [Solution(a) for a, v in zip(pool, values) if abs(v - best) <= tol(best)]
    return pool[0], best, pool


def lp_vertex_oracle(model, max_checks=2_000_000):
    """Optimal value of a tiny LP with finite bounds by vertex enumeration.

    Returns ``math.inf`` (min) or ``-math.inf`` (max) when infeasible.
    """
    A, senses, rhs = model.matrix()
    A = A.toarray()
    lb, ub = model.bounds_arrays()
    if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
        raise ValueError("vertex oracle needs finite variable bounds")
    n = model.num_vars
    cons = []  # (coefficients, rhs)
    eq_rows = []
    for r in range(A.shape[0]):
        (eq_rows if senses[r] == "E" else cons).append((A[r], rhs[r]))
    eye = np.eye(n)
    for j in range(n):
        cons.append((eye[j], lb[j]))
        cons.append((eye[j], ub[j]))
    free = n - len(eq_rows)
    if free < 0:
        free = 0
    if math.comb(len(cons), free) > max_checks:
        raise SizeGuard("LP too large for vertex enumeration")
    obj = np.array(model.obj, dtype=float)
    sign = 1.0 if model.sense == "min" else -1.0
    best = math.inf
    ax_tol = 1e-9
    for combo in itertools.combinations(range(len(cons)), free):
        rows = [e for e in eq_rows] + [cons[t] for t in combo]
        M = np.array([r[0] for r in rows]).reshape(len(rows), n)
        v = np.array([r[1] for r in rows])
        if M.shape[0] != n or abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, v)
        scale = 1.0 + np.abs(x).max()
        if np.any(x < lb - ax_tol * scale) or np.any(x > ub + ax_tol * scale):
            continue
        ax = A @ x
        ok = True
        for r in range(A.shape[0]):
            t = ax_tol * (1.0 + abs(rhs[r]) + np.abs(A[r]).sum() * scale)
            if senses[r] == "L" and ax[r] > rhs[r] + t:
                ok = False
            elif senses[r] == "G" and ax[r] < rhs[r] - t:
                ok = False
            elif senses[r] == "E" and abs(ax[r] - rhs[r]) > t:
                ok = False
            if not ok:
                break
        if ok:
            best = min(best, sign * float(obj @ x))
    return sign * best
