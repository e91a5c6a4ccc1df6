"""Linearized relaxations of the quadratic location model.

Every product ``z[i, k] * z[j, m]`` with ``i != j`` becomes one continuous
variable ``x(i, k, j, m)`` stored under the key with the smaller node first.
Products of two variables of the same node are exact: ``z[i, k]**2 = z[i, k]``
and ``z[i, k] * z[i, m] = 0`` for ``k != m`` (single assignment).

Row families (each multiplied by ``z[j, m]`` or by ``1 - z[j, m]``):

=============  ======================================================
``ASSIGN``     assignment rows times ``z[j, m]``, ``i != j``
``LINK_Z``     ``z[i, k] <= z[k, k]`` times ``z[j, m]``
``BOUND``      ``z[i, k] <= 1`` times ``z[j, m]``
``CARD_Z``     cardinality row times ``z[j, m]``
``CAP_Z``      capacity row of ``k`` times ``z[j, m]``, ``k != j``
``LINK_1MZ``   linking rows times ``1 - z[j, m]``
``CARD_1MZ``   cardinality row times ``1 - z[j, m]``
``CAP_1MZ``    capacity row of ``k`` times ``1 - z[j, m]``, ``k != j``
``STD``        ``x <= z[i, k]``, ``x <= z[j, m]``, ``x >= z[i, k] + z[j, m] - 1``
=============  ======================================================

Cardinality families exist only when ``p < n`` and capacity families only
for capacitated instances.
"""
from __future__ import annotations

import numpy as np

from ._formulation import add_location_constraints
from .errors import NumericalFailure, SizeGuard
from .instance import Instance, pair_index_matrix
from .lpcore import LpModel, solve

RLT_MAX_N = 30

FAMILIES = ("ASSIGN", "LINK_Z", "BOUND", "CARD_Z", "CAP_Z", "LINK_1MZ", "CARD_1MZ", "CAP_1MZ", "STD")

CONFIGS = {
    "STD": ("STD",),
    "RL1": ("ASSIGN", "LINK_Z", "BOUND", "CARD_Z", "CAP_Z", "LINK_1MZ", "CARD_1MZ", "CAP_1MZ"),
    "RL2": ("ASSIGN",),
    "RL3": ("ASSIGN", "LINK_Z"),
    "RL4": ("ASSIGN", "LINK_1MZ"),
    "RL5": ("ASSIGN", "LINK_Z", "LINK_1MZ"),
    "RL6": ("ASSIGN", "CAP_Z"),
    "RL7": ("ASSIGN", "CAP_1MZ"),
    "RL8": ("ASSIGN", "CAP_Z", "CAP_1MZ"),
}


class ProductIndex:
    """Variable ids of ``z[i, k]`` and of the linearized products."""

    def __init__(self, n):
        self.n = n
        self.z = np.arange(n * n).reshape(n, n)
        self.pair = pair_index_matrix(n)
        self.offset = n * n
        self.num_x = n * (n - 1) // 2 * n * n

    def x(self, i, k, j, m):
        if i > j:
            i, k, j, m = j, m, i, k
        return self.offset + (int(self.pair[i, j]) * self.n + k) * self.n + m

    def product(self, i, k, j, m):
        """Variable id standing for ``z[i, k] * z[j, m]``, or ``None`` when it is identically zero."""
        if i == j:
            return int(self.z[i, k]) if k == m else None
        return self.x(i, k, j, m)


class _Expr:
    def __init__(self):
        self.terms = {}
        self.const = 0.0

    def add(self, var, coef):
        if var is not None and coef != 0.0:
            self.terms[var] = self.terms.get(var, 0.0) + coef
        return self

    def emit(self, model, sense, name):
        """Add ``expr <sense> 0``; rows without variables are dropped (they hold trivially)."""
        terms = {v: c for v, c in self.terms.items() if c != 0.0}
        if not terms:
            if (sense == "L" and self.const > 1e-12) or (sense == "E" and abs(self.const) > 1e-12):
                raise NumericalFailure(f"row {name} is infeasible as a constant")
            return None
        idx = np.fromiter(terms.keys(), dtype=np.int64)
        val = np.fromiter(terms.values(), dtype=float)
        return model.add_row(idx, val, sense, -self.const, name=name)


def build_lp(inst: Instance, config="RL2", max_n=RLT_MAX_N) -> LpModel:
    """LP relaxation for ``config`` (a key of :data:`CONFIGS` or an iterable of family names).

    The model gets attributes ``index`` (a :class:`ProductIndex`) and
    ``families`` (row ids per family, including ``"BASE"``).
    """
    n = inst.n
    if n > max_n:
        raise SizeGuard(f"RLT models are limited to n <= {max_n}, got n={n}")
    families = CONFIGS[config] if isinstance(config, str) else tuple(config)
    unknown = set(families) - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown RLT families {sorted(unknown)}")
    idx = ProductIndex(n)
    model = LpModel("min", name=f"{inst.name or 'qploc'}-{config if isinstance(config, str) else 'custom'}")
    obj_z = inst.c.copy()
    obj_z[np.diag_indices(n)] += inst.f
    model.add_variables(n * n, lb=0.0, ub=1.0, obj=obj_z.ravel(),
                        names=[f"z_{i}_{k}" for i in range(n) for k in range(n)])
    dense = inst.q.to_dense().slices
    model.add_variables(idx.num_x, lb=0.0, ub=np.inf, obj=dense.ravel(),
                        names=[f"x_{i}_{k}_{j}_{m}" for i in range(n) for j in range(i + 1, n)
                               for k in range(n) for m in range(n)])
    base = add_location_constraints(model, inst, idx.z)
    rows = {"BASE": [r for fam in base.values() for r in fam]}
    for fam in families:
        rows[fam] = []
    card = inst.cardinality_bounded
    cap = inst.capacitated
    bbar = inst.bbar
    d = inst.d
    p = float(inst.p)
    N = range(n)
    z = idx.z

    def emit(fam, expr, sense, name):
        r = expr.emit(model, sense, name)
        if r is not None:
            rows[fam].append(r)

    for j in N:
        for m in N:
            zjm = int(z[j, m])
            if "ASSIGN" in families:
                for i in N:
                    if i == j:
                        continue
                    e = _Expr()
                    for k in N:
                        e.add(idx.product(i, k, j, m), 1.0)
                    e.add(zjm, -1.0)
                    emit("ASSIGN", e, "E", f"rlt_assign_{i}_{j}_{m}")
            for i in N:
                for k in N:
                    if i == k or i == j or k == j:
                        continue
                    if "LINK_Z" in families:
                        e = _Expr().add(idx.product(i, k, j, m), 1.0).add(idx.product(k, k, j, m), -1.0)
                        emit("LINK_Z", e, "L", f"rlt_linkz_{i}_{k}_{j}_{m}")
                    if "LINK_1MZ" in families:
                        e = (_Expr().add(int(z[i, k]), 1.0).add(idx.product(i, k, j, m), -1.0)
                             .add(int(z[k, k]), -1.0).add(idx.product(k, k, j, m), 1.0))
                        emit("LINK_1MZ", e, "L", f"rlt_link1mz_{i}_{k}_{j}_{m}")
                    if "BOUND" in families:
                        e = _Expr().add(idx.product(i, k, j, m), 1.0).add(zjm, -1.0)
                        emit("BOUND", e, "L", f"rlt_bound_{i}_{k}_{j}_{m}")
            if card and "CARD_Z" in families:
                e = _Expr()
                for k in N:
                    e.add(idx.product(k, k, j, m), 1.0)
                e.add(zjm, -p)
                emit("CARD_Z", e, "L", f"rlt_cardz_{j}_{m}")
            if card and "CARD_1MZ" in families:
                e = _Expr()
                for k in N:
                    e.add(int(z[k, k]), 1.0).add(idx.product(k, k, j, m), -1.0)
                e.add(zjm, p)
                e.const = -p
                emit("CARD_1MZ", e, "L", f"rlt_card1mz_{j}_{m}")
            if cap:
                for k in N:
                    if k == j:
                        continue
                    if "CAP_Z" in families:
                        e = _Expr()
                        for i in N:
                            if i != k:
                                e.add(idx.product(i, k, j, m), d[i])
                        e.add(idx.product(k, k, j, m), -bbar[k])
                        emit("CAP_Z", e, "L", f"rlt_capz_{k}_{j}_{m}")
                    if "CAP_1MZ" in families:
                        e = _Expr()
                        for i in N:
                            if i != k:
                                e.add(int(z[i, k]), d[i]).add(idx.product(i, k, j, m), -d[i])
                        e.add(int(z[k, k]), -bbar[k]).add(idx.product(k, k, j, m), bbar[k])
                        emit("CAP_1MZ", e, "L", f"rlt_cap1mz_{k}_{j}_{m}")
    if "STD" in families:
        for i in N:
            for j in range(i + 1, n):
                for k in N:
                    for m in N:
                        x = idx.x(i, k, j, m)
                        zik, zjm = int(z[i, k]), int(z[j, m])
                        rows["STD"].append(model.add_row([x, zik], [1.0, -1.0], "L", 0.0))
                        rows["STD"].append(model.add_row([x, zjm], [1.0, -1.0], "L", 0.0))
                        rows["STD"].append(model.add_row([x, zik, zjm], [1.0, -1.0, -1.0], "G", -1.0))
    model.index = idx
    model.families = rows
    return model


def lp_bound(inst: Instance, config="RL2", method="highs") -> float:
    """Optimal value of the LP relaxation ``config``."""
    res = solve(build_lp(inst, config), method=method)
    if not res.optimal:
        raise NumericalFailure(f"{config} relaxation ended with status {res.status}")
    return res.objective


def integral_point(inst: Instance, assign, index: ProductIndex | None = None):
    """Full ``(z, x)`` vector of an assignment, for checking row validity."""
    n = inst.n
    idx = index or ProductIndex(n)
    vec = np.zeros(idx.offset + idx.num_x)
    a = np.asarray(assign)
    vec[idx.z[np.arange(n), a]] = 1.0
    for i in range(n):
        for j in range(i + 1, n):
            vec[idx.x(i, a[i], j, a[j])] = 1.0
    return vec


def percent_gap(optimum, bound):
    return 100.0 * (optimum - bound) / optimum if optimum else 0.0
