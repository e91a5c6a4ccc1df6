"""Branch-and-cut over the Benders master, plus a generic MILP branch-and-bound.

:func:`solve` takes the state left by :func:`qploc.benders.root_loop` and
searches best-bound first with depth-first plunging. Integral node points
are checked by exact separation (tolerance 0); fractional nodes at depths
that are multiples of ``gamma`` receive up to ``upsilon`` further cuts.
Branching picks the most fractional ``z[k, k]``, then the most fractional
``z[i, k]``.

:func:`solve_milp` is a plain LP-based branch-and-bound used for the small
MILPs of the matheuristic.
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleInstance, NumericalFailure, TimeLimit
from .instance import Instance, Solution, evaluate
from .lpcore import INFEASIBLE, OPTIMAL, UNBOUNDED, LpModel, LpSession, solve as lp_solve

INT_TOL = 1e-6


# ---------------------------------------------------------------------------
# generic MILP
# ---------------------------------------------------------------------------

@dataclass
class MilpResult:
    status: str                 # optimal | infeasible | unbounded | limit
    x: np.ndarray | None
    objective: float
    bound: float
    nodes: int
    proven: bool

    @property
    def has_solution(self):
        return self.x is not None


def solve_milp(model: LpModel, integer_vars, node_limit=5000, time_limit=5.0, method="highs",
               gap_tol=1e-9) -> MilpResult:
    """Exact LP-based branch-and-bound (minimization or maximization).

    Branches on the most fractional integer variable; nodes are explored
    best-bound first. Limits return the best incumbent found with
    ``proven=False``.
    """
    ints = np.asarray(sorted(set(int(j) for j in integer_vars)), dtype=np.int64)
    sign = 1.0 if model.sense == "min" else -1.0
    lb0, ub0 = model.bounds_arrays()
    start = time.perf_counter()
    counter = itertools.count()
    best_x, best_val = None, math.inf  # in minimization sense
    heap = [(-math.inf, next(counter), lb0.copy(), ub0.copy())]
    nodes = 0
    limited = False
    root_bound = -math.inf
    session = LpSession(model) if method == "highs" else None
    try:
        while heap:
            bound, _, lo, up = heapq.heappop(heap)
            if bound >= best_val - gap_tol * max(1.0, abs(best_val)):
                continue
            if nodes >= node_limit or time.perf_counter() - start > time_limit:
                heapq.heappush(heap, (bound, next(counter), lo, up))
                limited = True
                break
            nodes += 1
            model.lb, model.ub = lo.tolist(), up.tolist()
            res = session.solve() if session is not None else lp_solve(model, method=method)
            if res.status == INFEASIBLE:
                continue
            if res.status == UNBOUNDED:
                if best_x is None and nodes == 1:
                    return MilpResult(UNBOUNDED, None, -sign * math.inf, -sign * math.inf, nodes, True)
                continue
            if res.status != OPTIMAL:
                continue
            val = sign * res.objective
            if nodes == 1:
                root_bound = val
            if val >= best_val - gap_tol * max(1.0, abs(best_val)):
                continue
            xi = res.x[ints] if ints.size else np.zeros(0)
            frac = np.abs(xi - np.round(xi))
            if ints.size == 0 or frac.max() <= INT_TOL:
                x = res.x.copy()
                if ints.size:
                    x[ints] = np.round(x[ints])
                best_x, best_val = x, sign * model.objective_value(x)
                continue
            t = int(np.argmax(frac))
            j = int(ints[t])
            v = xi[t]
            down_up = up.copy()
            down_up[j] = math.floor(v)
            up_lo = lo.copy()
            up_lo[j] = math.ceil(v)
            heapq.heappush(heap, (val, next(counter), lo.copy(), down_up))
            heapq.heappush(heap, (val, next(counter), up_lo, up.copy()))
    finally:
        model.lb, model.ub = lb0.tolist(), ub0.tolist()
    if best_x is None:
        if limited:
            return MilpResult("limit", None, math.nan, sign * root_bound, nodes, False)
        return MilpResult(INFEASIBLE, None, math.nan, math.nan, nodes, True)
    remaining = [b for b, *_ in heap]
    bound = min(remaining + [best_val]) if limited else best_val
    return MilpResult(OPTIMAL if not limited else "limit", best_x, sign * best_val, sign * bound,
                      nodes, not limited)


# ---------------------------------------------------------------------------
# branch-and-cut
# ---------------------------------------------------------------------------

@dataclass
class SolveParams:
    """Root and tree parameters; root fields are passed on to :class:`BendersParams`."""
    phi: float = 0.5
    eps_cut: float = 100.0
    kappa: float = 0.1
    gamma: int = 10             # user cuts at depths that are multiples of gamma
    upsilon: int = 2            # at most upsilon user cuts per node
    tol_gap: float = 1e-6       # relative
    node_limit: int = 1_000_000
    time_limit: float = math.inf
    heuristic: bool = True
    eliminate: bool = True
    partial: bool = True
    pe_every: int = 2
    workers: int = 1
    lp_method: str = "highs"
    seed: int = 0
    record_pruned: bool = False

    def root_params(self):
        from .benders import BendersParams
        return BendersParams(phi=self.phi, eps_cut=self.eps_cut, kappa=self.kappa,
                             pe_every=self.pe_every, time_limit=self.time_limit,
                             heuristic=self.heuristic, eliminate=self.eliminate,
                             partial=self.partial, workers=self.workers,
                             lp_method=self.lp_method, seed=self.seed)


@dataclass(order=True)
class BnbNode:
    bound: float
    order: int
    depth: int = field(compare=False)
    fixings: tuple = field(compare=False, default=())   # ((var, value), ...)

    def __post_init__(self):
        seen = {}
        for var, value in self.fixings:
            if seen.setdefault(var, value) != value:
                raise ValueError(f"variable {var} fixed both ways")


MAX_LAZY_ROUNDS = 200


def _branch_variable(state, zbar):
    """Most fractional ``z[k, k]``, else most fractional ``z[i, k]``; ``None`` if integral."""
    n = state.n
    diag = np.diag(zbar)
    frac = np.abs(diag - np.round(diag))
    k = int(np.argmax(frac))
    if frac[k] > INT_TOL:
        return int(state.z[k, k]), float(diag[k])
    frac = np.abs(zbar - np.round(zbar))
    t = int(np.argmax(frac))
    if frac.flat[t] > INT_TOL:
        i, k = divmod(t, n)
        return int(state.z[i, k]), float(zbar[i, k])
    return None


def _close_enough(bound, ub, tol):
    return bound >= ub - tol * max(1.0, abs(ub))


def solve(inst: Instance, params: SolveParams | None = None, state=None):
    """Exact branch-and-cut; returns ``(Solution, status, stats)``.

    ``status`` is ``"optimal"``, ``"time_limit"`` or ``"node_limit"``. With a
    limit the incumbent is returned together with the remaining gap in
    ``stats``. Raises :class:`InfeasibleInstance` when no assignment exists.
    """
    from .benders import root_loop
    from .transport import separate_all

    params = params or SolveParams()
    start = time.perf_counter()
    state = root_loop(inst, params.root_params(), state=state)
    root_time = time.perf_counter() - start
    model = state.model
    lb0, ub0 = model.bounds_arrays()
    lb0, ub0 = lb0.copy(), ub0.copy()
    counter = itertools.count()
    heap = []
    pruned = []
    nodes = 0
    status = "optimal"
    tol = params.tol_gap

    def node_lp(node):
        lo, up = lb0.copy(), ub0.copy()
        for var, value in node.fixings:
            lo[var] = up[var] = value
        model.lb, model.ub = lo.tolist(), up.tolist()
        return state.raw_solve()

    def prune(node, why):
        if params.record_pruned:
            pruned.append((node.fixings, node.bound, why))

    current = node = None
    if state.timed_out:
        status = "time_limit"
    if not (state.timed_out or _close_enough(state.lb, state.ub, tol)):
        current = BnbNode(state.lb, next(counter), 0, ())
    try:
        while current is not None or heap:
            if current is None:
                current = heapq.heappop(heap)
            node, current = current, None
            if _close_enough(node.bound, state.ub, tol):
                prune(node, "bound")
                continue
            if time.perf_counter() - start > params.time_limit:
                heapq.heappush(heap, node)
                status = "time_limit"
                break
            if nodes >= params.node_limit:
                heapq.heappush(heap, node)
                status = "node_limit"
                break
            if node.depth > 0:
                nodes += 1
            user_cuts = 0
            lazy_rounds = 0
            while True:
                res = node_lp(node)
                if res.status == INFEASIBLE:
                    prune(node, "infeasible")
                    res = None
                    break
                if res.status != OPTIMAL:
                    raise NumericalFailure(f"node LP ended with status {res.status}")
                node.bound = max(node.bound, res.objective)
                if _close_enough(node.bound, state.ub, tol):
                    prune(node, "bound")
                    res = None
                    break
                zbar = state.zbar(res)
                choice = _branch_variable(state, zbar)
                eta = float(res.x[state.eta])
                if choice is None:
                    sol = Solution(np.argmax(zbar, axis=1))
                    quad = inst.q.total(sol.assign)
                    if quad - eta > 1e-9 * max(1.0, abs(quad)):
                        lazy_rounds += 1
                        if lazy_rounds > MAX_LAZY_ROUNDS:
                            raise NumericalFailure("lazy separation does not converge")
                        cut, _ = state.separate(np.round(zbar))
                        state.add_cut(cut)
                        continue
                    state.offer(sol, "tree")
                    prune(node, "integral")
                    res = None
                    break
                if node.depth % params.gamma == 0 and user_cuts < params.upsilon:
                    cut, value = state.separate(zbar)
                    if value - eta > params.eps_cut:
                        state.add_cut(cut)
                        user_cuts += 1
                        continue
                break
            if res is None:
                continue
            var, v = choice
            down = BnbNode(node.bound, next(counter), node.depth + 1, node.fixings + ((var, 0.0),))
            upn = BnbNode(node.bound, next(counter), node.depth + 1, node.fixings + ((var, 1.0),))
            dive, other = (upn, down) if v >= 0.5 else (down, upn)
            heapq.heappush(heap, other)
            current = dive
    except TimeLimit:
        status = "time_limit"
        if current is None and node is not None:
            current = node
    finally:
        model.lb, model.ub = lb0.tolist(), ub0.tolist()

    open_bounds = [nd.bound for nd in heap]
    if current is not None:
        open_bounds.append(current.bound)
    lb = min(open_bounds + [state.ub]) if status != "optimal" else state.ub
    if state.timed_out:
        lb = min(lb, state.lb)
    if state.incumbent is None:
        if status == "optimal":
            raise InfeasibleInstance("no feasible assignment exists")
        raise TimeLimit("limit reached before any feasible solution was found")
    sol = state.incumbent
    # final soundness check: exact separation at the incumbent reproduces its interaction cost
    z_inc = sol.to_z()
    _, sub_value = separate_all(z_inc, z_inc, inst, cache={})
    quad = inst.q.total(sol.assign)
    if abs(sub_value - quad) > 1e-6 * max(1.0, abs(quad)):
        raise NumericalFailure(f"incumbent check failed: subproblem {sub_value} vs {quad}")
    total = time.perf_counter() - start
    value = evaluate(inst, sol).total
    heur = state.stats["heuristic_value"]
    stats = {
        "time(s)": total,
        "%Dev heur": 100.0 * (heur - value) / abs(value) if math.isfinite(heur) and value else 0.0,
        "%fixed plants": 100.0 * len(state.eliminated) / inst.n,
        "%time root": 100.0 * root_time / total if total > 0 else 100.0,
        "BB nodes": nodes,
        "Opt": value,
        "LB": min(lb, value),
        "UB": value,
        "gap(%)": 100.0 * (value - min(lb, value)) / abs(value) if value else 0.0,
        "root LB": state.log[-1]["LB"] if state.log else state.lb,
        "cuts": state.stats["cuts"],
        "lp solves": state.stats["lp_solves"],
        "eliminated": len(state.eliminated),
        "fixed open": len(state.fixed_open),
        "status": status,
    }
    if params.record_pruned:
        stats["pruned"] = pruned
    return sol, status, stats
