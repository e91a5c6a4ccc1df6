"""Benders master problem over the location/assignment variables.

The master LP has variables ``z[i, k]`` in ``[0, 1]`` and one variable
``eta >= 0`` standing for the interaction cost. Optimality cuts read
``eta - sum(g * z) >= 0``; they are separated at the current LP point with a
stabilized core point breaking ties (see :mod:`qploc.transport`).

:func:`root_loop` runs the root cutting-plane phase: LP solve, matheuristic
on the LP support, elimination tests, periodic partial enumeration and cut
generation, until the bound stalls.
"""
from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass

import numpy as np

from ._formulation import add_location_constraints
from .errors import InfeasibleInstance, InfeasibleSolution, InvalidCardinality, NumericalFailure, TimeLimit
from .instance import Instance, Solution, evaluate
from .lpcore import LpModel, LpSession, solve
from .transport import BendersCut, separate_all

__all__ = ["BendersCut", "BendersParams", "CorePoint", "MasterState", "make_core_point",
           "update_separation_point", "root_loop"]


@dataclass
class CorePoint:
    z: np.ndarray
    candidates: tuple
    eps: float


def core_eps_bound(h, p):
    """Upper bound on the core point parameter for ``|H| = h`` candidates."""
    if h <= 2:
        return 1.0 / h
    return min(1.0 / h, (p - 1) / (h - 2))


def make_core_point(candidates, p, n=None, eps=None) -> CorePoint:
    """Relative-interior point supported on the candidate facilities.

    Candidates get ``p/|H| - eps`` on the diagonal and share the rest of
    their row equally among the other candidates; every other node spreads
    its row uniformly over the candidates. ``p`` is capped at ``|H|``.
    ``p = 1`` uses ``1/|H| - eps`` on the diagonal with ``eps = 1/(10|H|)``
    unless given, and a single candidate yields the point mass on it.
    """
    H = tuple(sorted(int(k) for k in candidates))
    h = len(H)
    if h == 0:
        raise InvalidCardinality("core point needs at least one candidate facility")
    if p < 1:
        raise InvalidCardinality(f"p must be >= 1, got {p}")
    n = (max(H) + 1) if n is None else n
    z0 = np.zeros((n, n))
    cols = np.array(H)
    if h == 1:
        z0[:, cols[0]] = 1.0
        return CorePoint(z0, H, 0.0)
    pe = min(p, h)
    if pe == 1:
        eps = 1.0 / (10 * h) if eps is None else eps
        if not 0 < eps < 1.0 / h:
            raise InvalidCardinality(f"eps={eps} outside (0, {1.0 / h})")
    else:
        bound = core_eps_bound(h, pe)
        eps = bound / 2 if eps is None else eps
        if not 0 < eps < bound:
            raise InvalidCardinality(f"eps={eps} outside (0, {bound})")
    diag = pe / h - eps
    off = (1.0 - diag) / (h - 1)
    z0[:, cols] = 1.0 / h
    z0[np.ix_(cols, cols)] = off
    z0[cols, cols] = diag
    return CorePoint(z0, H, float(eps))


def update_separation_point(zhat, zbar, phi):
    """Convex combination ``phi * zhat + (1 - phi) * zbar``."""
    if not 0 < phi < 1:
        raise ValueError(f"phi must lie in (0, 1), got {phi}")
    return phi * np.asarray(zhat, dtype=float) + (1.0 - phi) * np.asarray(zbar, dtype=float)


@dataclass
class BendersParams:
    phi: float = 0.5            # stabilization weight
    eps_cut: float = 100.0      # minimum violation for adding a cut at fractional points
    kappa: float = 0.1          # stop when the bound improves by less than kappa percent
    pe_every: int = 2           # run PE0 every pe_every-th iteration
    max_iter: int = 10000
    time_limit: float = math.inf
    heuristic: bool = True
    eliminate: bool = True
    partial: bool = True
    workers: int = 1
    lp_method: str = "highs"
    pool_cap: int = 5000
    archive_after: int = 20
    seed: int = 0


class MasterState:
    """Master LP over ``(z, eta)`` with the cut pool, bounds and reductions."""

    def __init__(self, inst: Instance, params: BendersParams | None = None):
        self.inst = inst
        self.params = params or BendersParams()
        n = inst.n
        self.n = n
        model = LpModel("min", name="master")
        obj = inst.c.copy()
        obj[np.diag_indices(n)] += inst.f
        model.add_variables(n * n, lb=0.0, ub=1.0, obj=obj.ravel(),
                            names=[f"z_{i}_{k}" for i in range(n) for k in range(n)])
        self.eta = model.add_variable(0.0, math.inf, 1.0, name="eta")
        self.z = np.arange(n * n).reshape(n, n)
        self.base_rows = add_location_constraints(model, inst, self.z)
        self.model = model
        self.session = LpSession(model) if self.params.lp_method == "highs" else None
        self.cuts = []           # active BendersCut objects
        self.cut_rows = []       # model row id of each active cut
        self.cut_slack_age = []
        self.cut_names = []
        self.archive = []
        self.lb = -math.inf
        self.ub = math.inf
        self.incumbent: Solution | None = None
        self.eliminated = set()
        self.fixed_open = set()
        self.result = None
        self.iteration = 0
        self.log = []
        self.sep_cache = {}
        self.stats = {"cuts": 0, "lp_solves": 0, "separations": 0, "heuristic_calls": 0,
                      "eliminated": 0, "pe0": 0, "pe1": 0, "heuristic_value": math.inf}
        self.zhat = make_core_point(self.candidates, inst.p, n).z
        self.started = time.perf_counter()

    # -- facility sets ------------------------------------------------------
    @property
    def candidates(self):
        return tuple(k for k in range(self.n) if k not in self.eliminated)

    def close_facility(self, k):
        """Remove ``k`` permanently: ``z[k, k]`` and its column fixed to zero."""
        if k in self.eliminated:
            return
        if k in self.fixed_open:
            raise NumericalFailure(f"facility {k} is both fixed open and eliminated")
        self.eliminated.add(k)
        for i in range(self.n):
            self.model.fix_variable(int(self.z[i, k]), 0.0)
        self.reset_separation_point()

    def open_facility(self, k):
        self.fixed_open.add(k)
        self.model.fix_variable(int(self.z[k, k]), 1.0)

    def reset_separation_point(self):
        cand = self.candidates
        if cand:
            self.zhat = make_core_point(cand, self.inst.p, self.n).z

    # -- LP -----------------------------------------------------------------
    def raw_solve(self):
        """Solve the master LP as it stands, without updating the state."""
        self.stats["lp_solves"] += 1
        if self.session is not None:
            return self.session.solve()
        return solve(self.model, method=self.params.lp_method)

    def solve_lp(self):
        res = self.raw_solve()
        if res.status == "infeasible":
            raise InfeasibleInstance("master LP is infeasible")
        if not res.optimal:
            raise NumericalFailure(f"master LP ended with status {res.status}")
        self.result = res
        self._age_cuts(res.x)
        return res

    def zbar(self, res=None):
        """LP point cleaned of solver noise: clipped, tiny entries dropped, rows summing to one."""
        res = res or self.result
        z = np.clip(res.x[:self.n * self.n].reshape(self.n, self.n), 0.0, 1.0)
        z[z < 1e-9] = 0.0
        if self.eliminated:
            z[:, sorted(self.eliminated)] = 0.0
        return z / z.sum(axis=1, keepdims=True)

    def eta_value(self, res=None):
        res = res or self.result
        return float(res.x[self.eta])

    # -- cuts ---------------------------------------------------------------
    def separate(self, zbar, zcore=None):
        """Cut at ``zbar`` (core ``zcore`` defaults to the separation point) and the subproblem value."""
        zcore = self.zhat if zcore is None else zcore
        cut, value = separate_all(zbar, zcore, self.inst, nodes=self.candidates,
                                  workers=self.params.workers, cache=self.sep_cache,
                                  deadline=self.deadline)
        self.stats["separations"] += 1
        cut.iteration = self.iteration
        cut.point_hash = hashlib.sha1(np.ascontiguousarray(zbar).tobytes()).hexdigest()[:12]
        if len(self.sep_cache) > 200000:
            self.sep_cache.clear()
        return cut, value

    def add_cut(self, cut: BendersCut):
        g = cut.g.ravel()
        nz = np.flatnonzero(g)
        idx = np.concatenate([[self.eta], nz])
        val = np.concatenate([[1.0], -g[nz]])
        name = f"cut_{self.stats['cuts']}"
        row = self.model.add_row(idx, val, "G", 0.0, name=name)
        self.cuts.append(cut)
        self.cut_rows.append(row)
        self.cut_names.append(name)
        self.cut_slack_age.append(0)
        self.stats["cuts"] += 1
        if len(self.cuts) > self.params.pool_cap:
            self._archive_slack_cuts()
        return row

    def _age_cuts(self, x):
        if not self.cuts:
            return
        zb = x[:self.n * self.n]
        eta = x[self.eta]
        limit = 10 * self.params.eps_cut
        for t, cut in enumerate(self.cuts):
            slack = eta - float(cut.g.ravel() @ zb)
            self.cut_slack_age[t] = self.cut_slack_age[t] + 1 if slack > limit else 0

    def _archive_slack_cuts(self):
        old = [t for t, age in enumerate(self.cut_slack_age) if age >= self.params.archive_after]
        if not old:
            return
        drop = set(old)
        self.model.remove_rows([self.cut_rows[t] for t in old])
        self.archive.extend(self.cuts[t] for t in old)
        keep = [t for t in range(len(self.cuts)) if t not in drop]
        self.cuts = [self.cuts[t] for t in keep]
        self.cut_slack_age = [self.cut_slack_age[t] for t in keep]
        self.cut_names = [self.cut_names[t] for t in keep]
        # rows after removed ones shift down; look the ids up again by name
        position = {r[4]: pos for pos, r in enumerate(self.model.rows)}
        self.cut_rows = [position[name] for name in self.cut_names]

    # -- incumbent ----------------------------------------------------------
    def offer(self, sol: Solution, source=""):
        """Accept ``sol`` as incumbent if it is feasible and better; returns True on update."""
        try:
            value = evaluate(self.inst, sol).total
        except InfeasibleSolution:
            return False
        if value < self.ub - 1e-12 * max(1.0, abs(value)):
            self.ub = value
            self.incumbent = sol
            return True
        return False

    @property
    def deadline(self):
        limit = self.params.time_limit
        return self.started + limit if math.isfinite(limit) else None

    def elapsed(self):
        return time.perf_counter() - self.started

    def check_time(self):
        if self.elapsed() > self.params.time_limit:
            raise TimeLimit("root phase stopped at the time limit")

    def record(self):
        self.log.append({"iter": self.iteration, "LB": self.lb, "UB": self.ub, "cuts": len(self.cuts),
                         "eliminated": len(self.eliminated), "fixed": len(self.fixed_open),
                         "time": round(self.elapsed(), 4)})


def _support(zbar, tol=1e-9):
    return tuple(int(k) for k in np.flatnonzero(np.diag(zbar) > tol))


def run_heuristic(state: MasterState, support):
    """Matheuristic on the LP support; updates the incumbent."""
    from .matheur import matheuristic
    state.stats["heuristic_calls"] += 1
    sol = matheuristic(state.inst, support, allowed=state.candidates, deadline=state.deadline)
    if sol is not None:
        value = evaluate(state.inst, sol).total
        state.stats["heuristic_value"] = min(state.stats["heuristic_value"], value)
        state.offer(sol, "heuristic")
    return sol


def root_loop(inst: Instance, params: BendersParams | None = None, state: MasterState | None = None):
    """Root cutting-plane phase; returns the :class:`MasterState` ready for branching.

    ``state.timed_out`` is set when the time limit interrupted the loop.
    """
    from .reduce import eliminate, partial_enumeration

    params = params or BendersParams()
    state = state or MasterState(inst, params)
    state.timed_out = False
    res = state.solve_lp()
    state.lb = res.objective
    try:
        _cutting_planes(state, params, eliminate, partial_enumeration)
    except TimeLimit:
        state.timed_out = True
    if params.partial and math.isfinite(state.ub) and not state.timed_out:
        try:
            changed = partial_enumeration(state, "PE1")
            changed = partial_enumeration(state, "PE0") or changed
        except TimeLimit:
            state.timed_out = True
            changed = True
        if changed:
            res = state.solve_lp()
            state.lb = max(state.lb, res.objective)
    state.record()
    return state


def _cutting_planes(state, params, eliminate, partial_enumeration):
    last_support = None
    while True:
        state.iteration += 1
        zbar = state.zbar()
        support = _support(zbar)
        if params.heuristic and support != last_support:
            run_heuristic(state, support)
            last_support = support
        state.check_time()
        if params.eliminate and math.isfinite(state.ub):
            if eliminate(state):
                res = state.solve_lp()
                state.lb = max(state.lb, res.objective)
                zbar = state.zbar()
        if params.partial and math.isfinite(state.ub) and state.iteration % params.pe_every == 0:
            if partial_enumeration(state, "PE0"):
                res = state.solve_lp()
                state.lb = max(state.lb, res.objective)
                zbar = state.zbar()
        state.zhat = update_separation_point(state.zhat, zbar, params.phi)
        cut, value = state.separate(zbar)
        violation = value - state.eta_value()
        state.record()
        if violation <= params.eps_cut:
            return
        state.add_cut(cut)
        before = state.lb
        res = state.solve_lp()
        state.lb = max(state.lb, res.objective)
        if state.lb >= state.ub - 1e-9 * max(1.0, abs(state.ub)):
            return
        gain = 100.0 * (state.lb - before) / max(abs(before), 1e-12)
        if gain < params.kappa or state.iteration >= params.max_iter:
            return
        state.check_time()
