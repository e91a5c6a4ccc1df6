"""Bounded-variable linear programs.

:class:`LpModel` keeps variables (bounds, objective) and sparse rows with a
sense in ``{"L", "G", "E"}``. :func:`solve` minimizes (or maximizes) it with
either scipy's HiGHS (default, fast) or :func:`revised_simplex`, a dense
bounded-variable revised simplex kept as an independent second route.

Row duals are reported as ``y = d objective / d rhs`` and reduced costs as
``c - A^T y``, in the model's own objective sense.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import IndexOutOfRange, NumericalFailure, ParseError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

TOL_FEAS = 1e-7
TOL_PIVOT = 1e-9
STALL_LIMIT = 2000

INF = math.inf


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    basis: object = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == OPTIMAL


class LpModel:
    """Variables with bounds and costs plus sparse rows ``sum(val * x[idx]) <sense> rhs``."""

    def __init__(self, sense="min", name=""):
        if sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        self.sense = sense
        self.name = name
        self.lb = []
        self.ub = []
        self.obj = []
        self.var_names = []
        self.rows = []  # (idx array, val array, sense, rhs, name)
        self._saved = {}
        self._cache = None
        self.revision = 0   # bumped whenever variables or rows change

    # -- building -----------------------------------------------------------
    @property
    def num_vars(self):
        return len(self.obj)

    @property
    def num_rows(self):
        return len(self.rows)

    def add_variable(self, lb=0.0, ub=INF, obj=0.0, name=None):
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.var_names.append(name or f"x{len(self.obj) - 1}")
        self._cache = None
        self.revision += 1
        return len(self.obj) - 1

    def add_variables(self, count, lb=0.0, ub=INF, obj=0.0, names=None):
        start = self.num_vars
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (count,))
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (count,))
        obj = np.broadcast_to(np.asarray(obj, dtype=float), (count,))
        self.lb.extend(lb.tolist())
        self.ub.extend(ub.tolist())
        self.obj.extend(obj.tolist())
        if names is None:
            names = [f"x{start + t}" for t in range(count)]
        self.var_names.extend(names)
        self._cache = None
        self.revision += 1
        return np.arange(start, start + count)

    def _check_var(self, j):
        if not 0 <= j < self.num_vars:
            raise IndexOutOfRange(f"variable {j} out of range 0..{self.num_vars - 1}")

    def add_row(self, idx, val, sense, rhs, name=None):
        idx = np.asarray(idx, dtype=np.int64).ravel()
        val = np.broadcast_to(np.asarray(val, dtype=float), idx.shape).copy()
        if sense not in ("L", "G", "E"):
            raise ValueError(f"row sense must be L, G or E, got {sense!r}")
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_vars):
            raise IndexOutOfRange("row references an unknown variable")
        # merge duplicate indices
        if idx.size != np.unique(idx).size:
            uniq, inv = np.unique(idx, return_inverse=True)
            merged = np.zeros(len(uniq))
            np.add.at(merged, inv, val)
            idx, val = uniq, merged
        self.rows.append((idx, val, sense, float(rhs), name or f"r{len(self.rows)}"))
        self._cache = None
        self.revision += 1
        return len(self.rows) - 1

    def add_rows(self, rows):
        return [self.add_row(*r) for r in rows]

    def remove_rows(self, row_ids):
        drop = set(int(r) for r in row_ids)
        self.rows = [r for t, r in enumerate(self.rows) if t not in drop]
        self._cache = None
        self.revision += 1

    def set_bounds(self, j, lb, ub):
        self._check_var(j)
        self.lb[j] = float(lb)
        self.ub[j] = float(ub)

    def set_objective(self, j, value):
        self._check_var(j)
        self.obj[j] = float(value)

    def fix_variable(self, j, value):
        """Set both bounds of ``j`` to ``value``; :meth:`unfix_variable` restores them."""
        self._check_var(j)
        if j not in self._saved:
            self._saved[j] = (self.lb[j], self.ub[j])
        self.lb[j] = self.ub[j] = float(value)

    def unfix_variable(self, j):
        self._check_var(j)
        if j in self._saved:
            self.lb[j], self.ub[j] = self._saved.pop(j)

    def copy(self):
        other = LpModel(self.sense, self.name)
        other.lb, other.ub, other.obj = list(self.lb), list(self.ub), list(self.obj)
        other.var_names = list(self.var_names)
        other.rows = list(self.rows)
        other._saved = dict(self._saved)
        return other

    # -- matrix views -------------------------------------------------------
    def matrix(self):
        """``(A, senses, rhs)`` with ``A`` in CSR form."""
        if self._cache is None:
            m = self.num_rows
            lens = [len(r[0]) for r in self.rows]
            indptr = np.zeros(m + 1, dtype=np.int64)
            indptr[1:] = np.cumsum(lens)
            if m:
                cols = np.concatenate([r[0] for r in self.rows]) if indptr[-1] else np.zeros(0, np.int64)
                vals = np.concatenate([r[1] for r in self.rows]) if indptr[-1] else np.zeros(0)
            else:
                cols, vals = np.zeros(0, np.int64), np.zeros(0)
            A = sparse.csr_matrix((vals, cols, indptr), shape=(m, self.num_vars))
            senses = np.array([r[2] for r in self.rows], dtype="<U1")
            rhs = np.array([r[3] for r in self.rows], dtype=float)
            self._cache = (A, senses, rhs)  # bounds and objective are read fresh on every solve
        return self._cache

    def bounds_arrays(self):
        return np.array(self.lb, dtype=float), np.array(self.ub, dtype=float)

    def objective_value(self, x):
        return float(np.dot(self.obj, x))

    def max_violation(self, x):
        """Largest bound or row violation of ``x``."""
        A, senses, rhs = self.matrix()
        lb, ub = self.bounds_arrays()
        ax = A @ x if self.num_rows else np.zeros(0)
        viol = [0.0, np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0)]
        if self.num_rows:
            viol.append(np.max(np.where(senses == "L", ax - rhs, 0.0)))
            viol.append(np.max(np.where(senses == "G", rhs - ax, 0.0)))
            viol.append(np.max(np.where(senses == "E", np.abs(ax - rhs), 0.0)))
        return float(max(viol))

    # -- text format --------------------------------------------------------
    def to_lp_text(self):
        return write_lp(self)


def solve(model: LpModel, warm_basis=None, method="highs", **options) -> LpResult:
    """Solve ``model``; ``warm_basis`` is honoured by the ``simplex`` method only."""
    if method == "highs":
        return _solve_highs(model)
    if method == "simplex":
        return revised_simplex(model, warm_basis=warm_basis, **options)
    raise ValueError(f"unknown LP method {method!r}")


def _solve_highs(model):
    A, senses, rhs = model.matrix()
    c = np.array(model.obj, dtype=float)
    sign = 1.0 if model.sense == "min" else -1.0
    lb, ub = model.bounds_arrays()
    if np.any(lb > ub):
        return LpResult(INFEASIBLE)
    le = senses == "L"
    ge = senses == "G"
    eq = senses == "E"
    ineq = le | ge
    kw = {}
    if ineq.any():
        flip = np.where(ge[ineq], -1.0, 1.0)
        kw["A_ub"] = sparse.diags(flip) @ A[ineq]
        kw["b_ub"] = flip * rhs[ineq]
    if eq.any():
        kw["A_eq"] = A[eq]
        kw["b_eq"] = rhs[eq]
    bounds = np.column_stack([lb, ub])
    res = linprog(sign * c, bounds=bounds, method="highs", **kw)
    if res.status == 2:
        return LpResult(INFEASIBLE)
    if res.status == 3:
        return LpResult(UNBOUNDED)
    if res.status == 1:
        return LpResult(ITERATION_LIMIT)
    if res.status != 0:
        raise NumericalFailure(f"HiGHS failed: {res.message}")
    y = np.zeros(model.num_rows)
    if ineq.any():
        y[ineq] = flip * res.ineqlin.marginals
    if eq.any():
        y[eq] = res.eqlin.marginals
    y *= sign
    rc = c - (A.T @ y if model.num_rows else 0.0)
    x = np.clip(res.x, lb, ub)
    return LpResult(OPTIMAL, x=x, objective=float(c @ x), duals=y, reduced_costs=rc,
                    iterations=int(getattr(res, "nit", 0)))


# ---------------------------------------------------------------------------
# persistent HiGHS session
# ---------------------------------------------------------------------------

try:  # scipy bundles a HiGHS binding with a persistent solver object
    from scipy.optimize._highspy import _core as _highs_core
except ImportError:  # pragma: no cover - depends on the scipy build
    _highs_core = None


class LpSession:
    """Re-solves one growing :class:`LpModel` with warm-started dual simplex.

    The model is mirrored into a persistent HiGHS instance; rows added to or
    removed from ``model.rows`` and bound changes are synchronized before each
    solve, so the previous basis is reused. Falls back to :func:`solve` when
    the binding is unavailable. Results follow the conventions of
    :func:`solve`.
    """

    def __init__(self, model: LpModel):
        self.model = model
        self.available = _highs_core is not None
        self._rows = []     # row tuples currently loaded, in solver order
        self._ncols = 0
        self._revision = -1
        if self.available:
            self._h = _highs_core._Highs()
            self._h.setOptionValue("output_flag", False)
            self._inf = self._h.getInfinity()

    def _sync(self):
        h, model = self._h, self.model
        sign = 1.0 if model.sense == "min" else -1.0
        n = model.num_vars
        if n > self._ncols:
            extra = n - self._ncols
            h.addVars(extra, np.zeros(extra), np.zeros(extra))
            self._ncols = n
        cols = np.arange(n, dtype=np.int32)
        lb, ub = model.bounds_arrays()
        h.changeColsBounds(n, cols, np.where(np.isinf(lb), -self._inf, lb),
                           np.where(np.isinf(ub), self._inf, ub))
        h.changeColsCost(n, cols, sign * np.asarray(model.obj, dtype=float))
        if model.revision == self._revision:
            return
        present = {id(r) for r in model.rows}
        gone = [t for t, r in enumerate(self._rows) if id(r) not in present]
        if gone:
            h.deleteRows(len(gone), np.asarray(gone, dtype=np.int32))
            drop = set(gone)
            self._rows = [r for t, r in enumerate(self._rows) if t not in drop]
        loaded = {id(r) for r in self._rows}
        new = [r for r in model.rows if id(r) not in loaded]
        if new:
            lo = np.array([r[3] if r[2] in ("G", "E") else -self._inf for r in new])
            hi = np.array([r[3] if r[2] in ("L", "E") else self._inf for r in new])
            starts = np.zeros(len(new), dtype=np.int32)
            starts[1:] = np.cumsum([len(r[0]) for r in new[:-1]])
            idx = np.concatenate([r[0] for r in new]).astype(np.int32)
            val = np.concatenate([r[1] for r in new]).astype(float)
            h.addRows(len(new), lo, hi, len(idx), starts, idx, val)
            self._rows.extend(new)
        # solver row order must match the model's for the duals
        if [id(r) for r in self._rows] != [id(r) for r in model.rows]:
            self._reload()
        self._revision = model.revision

    def _reload(self):
        self._h.clearModel()
        self._rows, self._ncols, self._revision = [], 0, -1
        self._sync()

    def solve(self) -> LpResult:
        if not self.available:
            return solve(self.model)
        model = self.model
        lb, ub = model.bounds_arrays()
        if np.any(lb > ub):
            return LpResult(INFEASIBLE)
        self._sync()
        h = self._h
        h.run()
        status = h.modelStatusToString(h.getModelStatus())
        if status == "Infeasible":
            return LpResult(INFEASIBLE)
        if status in ("Unbounded", "Primal unbounded"):
            return LpResult(UNBOUNDED)
        if status == "Primal infeasible or unbounded":
            # resolve from scratch to tell the two apart
            return solve(model)
        if status != "Optimal":
            if status == "Iteration limit reached":
                return LpResult(ITERATION_LIMIT)
            raise NumericalFailure(f"HiGHS session ended with status {status!r}")
        sign = 1.0 if model.sense == "min" else -1.0
        sol = h.getSolution()
        x = np.clip(np.asarray(sol.col_value, dtype=float), lb, ub)
        y = sign * np.asarray(sol.row_dual, dtype=float)
        c = np.asarray(model.obj, dtype=float)
        A = model.matrix()[0]
        rc = c - (A.T @ y if model.num_rows else 0.0)
        return LpResult(OPTIMAL, x=x, objective=float(c @ x), duals=y, reduced_costs=rc,
                        iterations=int(h.getInfo().simplex_iteration_count))


# ---------------------------------------------------------------------------
# bounded-variable revised simplex
# ---------------------------------------------------------------------------

@dataclass
class SimplexBasis:
    """Basic column indices and the bound each nonbasic column sits at (0 lower, 1 upper)."""

    basic: np.ndarray
    at_upper: np.ndarray
    num_vars: int
    num_rows: int = field(default=0)


def _standard_form(model):
    """Columns = structurals, then one slack per row: ``A x + s = rhs``."""
    A, senses, rhs = model.matrix()
    m, n = A.shape
    full = np.zeros((m, n + m))
    if m:
        full[:, :n] = A.toarray()
        full[:, n:] = np.eye(m)
    lb, ub = model.bounds_arrays()
    slb = np.where(senses == "G", -INF, 0.0)
    sub = np.where(senses == "L", INF, 0.0)
    return full, rhs.copy(), np.concatenate([lb, slb]), np.concatenate([ub, sub])


def revised_simplex(model: LpModel, warm_basis: SimplexBasis | None = None, *, tol_feas=TOL_FEAS,
                    tol_pivot=TOL_PIVOT, stall_limit=STALL_LIMIT, max_iter=50000) -> LpResult:
    """Dense two-phase bounded-variable revised simplex.

    Dantzig pricing with a switch to Bland's rule once ``stall_limit``
    consecutive pivots leave the objective unchanged. Free variables are
    kept nonbasic at zero until they enter.
    """
    sign = 1.0 if model.sense == "min" else -1.0
    A, b, lo, hi = _standard_form(model)
    m, ncols = A.shape
    nvars = model.num_vars
    if np.any(lo > hi + tol_feas):
        return LpResult(INFEASIBLE)
    cost = np.zeros(ncols)
    cost[:nvars] = sign * np.array(model.obj, dtype=float)

    def nonbasic_value(j, up):
        if up:
            return hi[j]
        return lo[j] if np.isfinite(lo[j]) else (hi[j] if np.isfinite(hi[j]) else 0.0)

    start = None
    if warm_basis is not None and warm_basis.num_vars == nvars:
        start = _warm_start(warm_basis, model, A, b, lo, hi, tol_feas)

    iters = 0
    if start is None:
        # phase 1 with one artificial per row
        at_upper = np.zeros(ncols, dtype=bool)
        at_upper |= ~np.isfinite(lo) & np.isfinite(hi)
        xN = np.array([nonbasic_value(j, at_upper[j]) for j in range(ncols)])
        resid = b - A @ xN
        sgn = np.where(resid >= 0, 1.0, -1.0)
        A1 = np.hstack([A, np.diag(sgn)])
        lo1 = np.concatenate([lo, np.zeros(m)])
        hi1 = np.concatenate([hi, np.full(m, INF)])
        c1 = np.concatenate([np.zeros(ncols), np.ones(m)])
        basic = np.arange(ncols, ncols + m)
        at_up1 = np.concatenate([at_upper, np.zeros(m, dtype=bool)])
        status, basic, at_up1, x1, it = _simplex_core(A1, b, c1, lo1, hi1, basic, at_up1,
                                                      tol_feas, tol_pivot, stall_limit, max_iter)
        iters += it
        if status != OPTIMAL:
            raise NumericalFailure(f"phase 1 ended with status {status}")
        if c1 @ x1 > tol_feas * max(1.0, np.abs(b).max(initial=0.0)):
            return LpResult(INFEASIBLE, iterations=iters)
        # drive artificials out (or keep them basic with bounds [0, 0])
        lo2 = np.concatenate([lo, np.zeros(m)])
        hi2 = np.concatenate([hi, np.zeros(m)])
        A2, c2 = A1, np.concatenate([cost, np.zeros(m)])
        at_up2 = at_up1.copy()
        at_up2[ncols:] = False
    else:
        basic, at_up2 = start
        A2, c2, lo2, hi2 = A, cost, lo, hi

    status, basic, at_up2, x, it = _simplex_core(A2, b, c2, lo2, hi2, basic, at_up2,
                                                 tol_feas, tol_pivot, stall_limit, max_iter)
    iters += it
    if status != OPTIMAL:
        return LpResult(status, iterations=iters)
    B = A2[:, basic]
    pi = np.linalg.solve(B.T, c2[basic]) if m else np.zeros(0)
    xs = np.clip(x[:nvars], model.bounds_arrays()[0], model.bounds_arrays()[1])
    y = sign * pi
    obj = np.array(model.obj, dtype=float)
    rc = obj - (model.matrix()[0].T @ y if m else 0.0)
    keep = basic < ncols
    snap = SimplexBasis(basic[keep].copy(), at_up2[:ncols].copy(), nvars, m)
    return LpResult(OPTIMAL, x=xs, objective=float(obj @ xs), duals=y, reduced_costs=rc,
                    basis=snap, iterations=iters)


def _warm_start(wb, model, A, b, lo, hi, tol_feas):
    """Extend a previous basis with slacks of rows added since; ``None`` if not primal feasible."""
    m, ncols = A.shape
    nvars = model.num_vars
    old_m = wb.num_rows
    if old_m > m:
        return None
    # rows are only ever appended, so old slack r keeps column nvars + r
    basic = [int(j) for j in wb.basic]
    basic += [nvars + r for r in range(old_m, m)]
    if len(basic) != m or len(set(basic)) != m:
        return None
    basic = np.array(basic, dtype=np.int64)
    at_upper = np.zeros(ncols, dtype=bool)
    at_upper[:len(wb.at_upper)] = wb.at_upper[:ncols]
    at_upper &= np.isfinite(hi)
    B = A[:, basic]
    if np.linalg.matrix_rank(B) < m:
        return None
    xN = np.where(at_upper, hi, np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0)))
    xN[basic] = 0.0
    xB = np.linalg.solve(B, b - A @ xN)
    if np.any(xB < lo[basic] - tol_feas) or np.any(xB > hi[basic] + tol_feas):
        return None
    return basic, at_upper


def _simplex_core(A, b, c, lo, hi, basic, at_upper, tol_feas, tol_pivot, stall_limit, max_iter):
    m, ncols = A.shape
    basic = basic.copy()
    at_upper = at_upper.copy()
    is_basic = np.zeros(ncols, dtype=bool)
    is_basic[basic] = True
    stall = 0
    last_obj = INF
    bland = False

    def current_x():
        x = np.where(at_upper, hi, np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0)))
        x[is_basic] = 0.0
        if m:
            x[basic] = np.linalg.solve(A[:, basic], b - A @ x)
        return x

    for it in range(max_iter):
        x = current_x()
        B = A[:, basic]
        pi = np.linalg.solve(B.T, c[basic]) if m else np.zeros(0)
        d = c - A.T @ pi
        at_lo_free = ~at_upper & ~is_basic
        can_up = at_lo_free & (hi - x > tol_feas) & (d < -tol_feas)
        can_down = ~is_basic & (x - lo > tol_feas) & (d > tol_feas)
        cand = np.flatnonzero(can_up | can_down)
        if cand.size == 0:
            return OPTIMAL, basic, at_upper, x, it
        obj = c @ x
        if obj < last_obj - 1e-12 * max(1.0, abs(obj)):
            stall = 0
            last_obj = obj
        else:
            stall += 1
        if stall >= stall_limit:
            bland = True
        q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
        direction = 1.0 if can_up[q] else -1.0
        col = np.linalg.solve(B, A[:, q]) if m else np.zeros(0)
        # x_B changes by -direction * t * col
        step = hi[q] - lo[q]
        leave = -1
        leave_to_upper = False
        delta = -direction * col
        for r in range(m):
            if abs(delta[r]) <= tol_pivot:
                continue
            j = basic[r]
            if delta[r] > 0:
                room = hi[j] - x[j]
            else:
                room = x[j] - lo[j]
            if not np.isfinite(room):
                continue
            t = max(room, 0.0) / abs(delta[r])
            if t < step - 1e-12 or (t <= step + 1e-12 and leave >= 0 and bland and j < basic[leave]):
                step = t
                leave = r
                leave_to_upper = delta[r] > 0
        if not np.isfinite(step):
            return UNBOUNDED, basic, at_upper, x, it
        if leave < 0:
            # bound flip of the entering variable
            at_upper[q] = direction > 0
            continue
        out = basic[leave]
        basic[leave] = q
        is_basic[q] = True
        is_basic[out] = False
        at_upper[q] = False
        at_upper[out] = leave_to_upper and np.isfinite(hi[out])
    return ITERATION_LIMIT, basic, at_upper, current_x(), max_iter


# ---------------------------------------------------------------------------
# LP text format
# ---------------------------------------------------------------------------
#
#   \ comment
#   minimize | maximize
#     obj: 3 x0 - 2 x1
#   subject to
#     r0: x0 + x1 >= 1
#   bounds
#     0 <= x0 <= 1
#     x1 free
#   end
#
# Every variable gets a bounds line; names must match [A-Za-z_][\w.\[\],]*.

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]?inf"


def _fmt_num(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _fmt_expr(idx, val, names):
    parts = []
    for j, v in zip(idx, val):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_fmt_num(abs(v))} {names[j]}")
    text = " ".join(parts) if parts else "0"
    return text[2:] if text.startswith("+ ") else text


def write_lp(model: LpModel) -> str:
    names = model.var_names
    lines = [f"\\ {model.name or 'model'}", "minimize" if model.sense == "min" else "maximize"]
    nz = [j for j, v in enumerate(model.obj) if v != 0.0]
    lines.append("  obj: " + _fmt_expr(nz, [model.obj[j] for j in nz], names))
    lines.append("subject to")
    op = {"L": "<=", "G": ">=", "E": "="}
    for idx, val, sense, rhs, name in model.rows:
        lines.append(f"  {name}: {_fmt_expr(idx, val, names)} {op[sense]} {_fmt_num(rhs)}")
    lines.append("bounds")
    for j, name in enumerate(names):
        lo, up = model.lb[j], model.ub[j]
        if math.isinf(lo) and math.isinf(up):
            lines.append(f"  {name} free")
        else:
            lines.append(f"  {_fmt_num(lo)} <= {name} <= {_fmt_num(up)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


_TERM = re.compile(rf"\s*([+-])?\s*({_NUM})?\s*([A-Za-z_][\w.\[\],]*)")


def _parse_expr(text, index, lineno):
    text = text.strip()
    if text == "0":
        return [], []
    pos, idx, val = 0, [], []
    while pos < len(text):
        mt = _TERM.match(text, pos)
        if not mt or mt.end() == pos:
            raise ParseError(f"cannot parse expression near {text[pos:pos + 20]!r}", line=lineno)
        sign, coef, name = mt.groups()
        if name not in index:
            raise ParseError(f"unknown variable {name!r}", line=lineno, field=name)
        v = float(coef) if coef is not None else 1.0
        idx.append(index[name])
        val.append(-v if sign == "-" else v)
        pos = mt.end()
    return idx, val


def read_lp(text: str) -> LpModel:
    """Parse the output of :func:`write_lp`."""
    lines = [(n, ln.strip()) for n, ln in enumerate(text.splitlines(), 1)]
    lines = [(n, ln) for n, ln in lines if ln and not ln.startswith("\\")]
    section = None
    sense = None
    obj_line = None
    row_lines, bound_lines = [], []
    for lineno, ln in lines:
        low = ln.lower()
        if low in ("minimize", "maximize"):
            sense = "min" if low == "minimize" else "max"
            section = "obj"
        elif low == "subject to":
            section = "rows"
        elif low == "bounds":
            section = "bounds"
        elif low == "end":
            section = "end"
        elif section == "obj":
            obj_line = (lineno, ln)
        elif section == "rows":
            row_lines.append((lineno, ln))
        elif section == "bounds":
            bound_lines.append((lineno, ln))
        else:
            raise ParseError(f"unexpected line {ln!r}", line=lineno)
    if sense is None:
        raise ParseError("missing objective sense", field="minimize")
    if section != "end":
        raise ParseError("missing 'end'", field="end")
    model = LpModel(sense)
    index = {}
    for lineno, ln in bound_lines:
        mt = re.fullmatch(rf"({_NUM})\s*<=\s*(\S+)\s*<=\s*({_NUM})", ln)
        if mt:
            lo, name, up = float(mt.group(1)), mt.group(2), float(mt.group(3))
        else:
            mt = re.fullmatch(r"(\S+)\s+free", ln)
            if not mt:
                raise ParseError(f"bad bounds line {ln!r}", line=lineno)
            name, lo, up = mt.group(1), -INF, INF
        index[name] = model.add_variable(lo, up, 0.0, name=name)
    if obj_line is not None:
        lineno, ln = obj_line
        expr = ln.split(":", 1)[1] if ":" in ln else ln
        for j, v in zip(*_parse_expr(expr, index, lineno)):
            model.obj[j] += v
    for lineno, ln in row_lines:
        mt = re.fullmatch(rf"(\S+):\s*(.*?)\s*(<=|>=|=)\s*({_NUM})", ln)
        if not mt:
            raise ParseError(f"bad row {ln!r}", line=lineno)
        name, expr, op, rhs = mt.groups()
        idx, val = _parse_expr(expr, index, lineno)
        model.add_row(idx, val, {"<=": "L", ">=": "G", "=": "E"}[op], float(rhs), name=name)
    return model
