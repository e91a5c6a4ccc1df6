"""Transportation problems and Benders cut separation.

For a pair ``i < j`` and a master point ``z``, the interaction cost is bounded
below by the transportation problem that ships ``z[i, :]`` (supplies, index
``k``) to ``z[j, :]`` (demands, index ``m``) at unit cost ``q(i, k, j, m)``.
Its dual ``max sum_m z[j, m] alpha[m] + sum_k z[i, k] beta[k]`` subject to
``alpha[m] + beta[k] <= q(i, k, j, m)`` gives the cut coefficients.

The solver is a primal network simplex on a strongly feasible spanning tree.
Supplies and demands may carry a second, lexicographically subordinate
component: the basis returned is optimal for ``primary + eps * secondary``
for every small ``eps > 0``, so its duals are optimal for the primary problem
and, among those, best for the secondary weights. Using the master point as
primary and a core point as secondary yields Pareto-optimal cuts.
"""
from __future__ import annotations

import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure, TimeLimit, UnbalancedProblem

FLOW_TOL = 1e-12
BALANCE_TOL = 1e-9


@dataclass
class TransportProblem:
    """Balanced transportation problem; ``supply2``/``demand2`` are optional tie-break weights."""

    supply: np.ndarray
    demand: np.ndarray
    cost: np.ndarray
    supply2: np.ndarray | None = None
    demand2: np.ndarray | None = None

    def __post_init__(self):
        self.supply = np.asarray(self.supply, dtype=float)
        self.demand = np.asarray(self.demand, dtype=float)
        self.cost = np.asarray(self.cost, dtype=float)
        if self.cost.shape != (len(self.supply), len(self.demand)):
            raise ValueError(f"cost shape {self.cost.shape} does not match "
                             f"{len(self.supply)} supplies x {len(self.demand)} demands")
        if not np.all(np.isfinite(self.cost)):
            raise ValueError("transport costs must be finite")
        K, M = self.cost.shape
        self.supply2 = np.zeros(K) if self.supply2 is None else np.asarray(self.supply2, dtype=float)
        self.demand2 = np.zeros(M) if self.demand2 is None else np.asarray(self.demand2, dtype=float)
        for label, arr in (("supply", self.supply), ("demand", self.demand),
                           ("supply2", self.supply2), ("demand2", self.demand2)):
            if np.any(arr < -FLOW_TOL):
                raise ValueError(f"{label} must be nonnegative")
        for a, b, label in ((self.supply, self.demand, "primary"), (self.supply2, self.demand2, "secondary")):
            gap = abs(a.sum() - b.sum())
            if gap > BALANCE_TOL * max(1.0, a.sum()):
                raise UnbalancedProblem(f"{label} supplies sum to {a.sum()!r}, demands to {b.sum()!r}")


@dataclass
class DualPair:
    """Duals ``alpha`` (demand side, index m) and ``beta`` (supply side, index k).

    ``value`` is the primary dual objective ``demand @ alpha + supply @ beta``.
    ``tree`` lists the basic arcs as ``(k, m)`` pairs and can warm start a later solve.
    """

    alpha: np.ndarray
    beta: np.ndarray
    value: float
    value2: float = 0.0
    tree: list = field(default_factory=list, repr=False)
    pivots: int = 0


class _Network:
    """Bipartite network with a root node and big-M artificial arcs.

    Nodes: supplies ``0..K-1``, demands ``K..K+M-1``, root ``K+M``.
    Arcs: real ``k*M + m`` (k -> m); ``K*M + k`` (k -> root); ``K*M + K + m`` (root -> m).
    """

    def __init__(self, cost, big_m):
        K, M = cost.shape
        self.K, self.M = K, M
        self.root = K + M
        self.nreal = K * M
        narcs = K * M + K + M
        tail = np.empty(narcs, dtype=np.int64)
        head = np.empty(narcs, dtype=np.int64)
        arc_cost = np.empty(narcs)
        kk, mm = np.divmod(np.arange(K * M), M)
        tail[:K * M], head[:K * M] = kk, K + mm
        arc_cost[:K * M] = cost.ravel()
        tail[K * M:K * M + K], head[K * M:K * M + K] = np.arange(K), self.root
        tail[K * M + K:], head[K * M + K:] = self.root, K + np.arange(M)
        arc_cost[K * M:] = big_m
        self.tail, self.head, self.cost = tail, head, arc_cost


def _lex_less(ap, as_, bp, bs):
    if ap < bp - FLOW_TOL:
        return True
    if ap > bp + FLOW_TOL:
        return False
    return as_ < bs - FLOW_TOL


def _lex_positive(p, s):
    return p > FLOW_TOL or (p >= -FLOW_TOL and s > FLOW_TOL)


def _tree_flows(net, tree_arcs, bal_p, bal_s):
    """Flows on a spanning tree by leaf elimination; ``None`` if the arcs are not a spanning tree."""
    nnodes = net.root + 1
    if len(tree_arcs) != nnodes - 1:
        return None
    adj = [[] for _ in range(nnodes)]
    for a in tree_arcs:
        adj[net.tail[a]].append(a)
        adj[net.head[a]].append(a)
    deg = np.array([len(x) for x in adj])
    bp, bs = bal_p.copy(), bal_s.copy()
    fp = {}
    fs = {}
    used = set()
    stack = [v for v in range(nnodes) if deg[v] == 1 and v != net.root]
    while stack:
        x = stack.pop()
        arcs = [a for a in adj[x] if a not in used]
        if len(arcs) != 1:
            continue
        a = arcs[0]
        used.add(a)
        y = net.head[a] if net.tail[a] == x else net.tail[a]
        sgn = 1.0 if net.tail[a] == x else -1.0
        fp[a], fs[a] = sgn * bp[x], sgn * bs[x]
        bp[y] += bp[x]
        bs[y] += bs[x]
        deg[y] -= 1
        if deg[y] == 1 and y != net.root:
            stack.append(y)
    if len(used) != len(tree_arcs):
        return None
    return fp, fs


class _Tree:
    """Spanning tree with parent pointers, depths and node potentials."""

    def __init__(self, net, arcs):
        self.net = net
        self.arcs = set(arcs)
        self.rebuild()

    def rebuild(self):
        net = self.net
        nnodes = net.root + 1
        adj = [[] for _ in range(nnodes)]
        for a in self.arcs:
            adj[net.tail[a]].append(a)
            adj[net.head[a]].append(a)
        parent = np.full(nnodes, -1, dtype=np.int64)
        parc = np.full(nnodes, -1, dtype=np.int64)
        depth = np.zeros(nnodes, dtype=np.int64)
        pot = np.zeros(nnodes)
        seen = np.zeros(nnodes, dtype=bool)
        seen[net.root] = True
        queue = deque([net.root])
        while queue:
            u = queue.popleft()
            for a in sorted(adj[u]):
                v = net.head[a] if net.tail[a] == u else net.tail[a]
                if seen[v]:
                    continue
                seen[v] = True
                parent[v], parc[v], depth[v] = u, a, depth[u] + 1
                # reduced cost c - pot[tail] + pot[head] is zero on tree arcs
                pot[v] = pot[u] - net.cost[a] if net.tail[a] == u else pot[u] + net.cost[a]
                queue.append(v)
        if not seen.all():
            raise NumericalFailure("spanning tree lost connectivity")
        self.parent, self.parc, self.depth, self.pot = parent.tolist(), parc.tolist(), depth.tolist(), pot
        self.children = [set() for _ in range(nnodes)]
        for v in range(nnodes):
            if parent[v] >= 0:
                self.children[parent[v]].add(v)

    def pivot(self, enter, leave):
        """Swap ``leave`` for ``enter`` and re-hang the detached subtree without a full rebuild."""
        net = self.net
        parent, parc, children = self.parent, self.parc, self.children
        t_l, h_l = int(net.tail[leave]), int(net.head[leave])
        cut = t_l if parc[t_l] == leave else h_l
        u, v = int(net.tail[enter]), int(net.head[enter])
        x = u
        while x != -1 and x != cut:
            x = parent[x]
        s, t = (u, v) if x == cut else (v, u)
        old_pot = self.pot[s]
        prev_node, prev_arc, x = t, enter, s
        while True:
            nxt, nxt_arc = parent[x], parc[x]
            children[nxt].discard(x)
            parent[x], parc[x] = prev_node, prev_arc
            children[prev_node].add(x)
            if x == cut:
                break
            prev_node, prev_arc, x = x, nxt_arc, nxt
        self.arcs.discard(leave)
        self.arcs.add(enter)
        new_pot = self.pot[t] - net.cost[enter] if net.tail[enter] == t else self.pot[t] + net.cost[enter]
        shift = new_pot - old_pot
        depth = self.depth
        depth[s] = depth[t] + 1
        sub = [s]
        stack = [s]
        while stack:
            y = stack.pop()
            for c in children[y]:
                depth[c] = depth[y] + 1
                sub.append(c)
                stack.append(c)
        self.pot[sub] += shift

    def strongly_feasible(self, fp, fs):
        """Every zero-flow tree arc points away from the root."""
        net = self.net
        for v in range(net.root):
            a = self.parc[v]
            if not _lex_positive(fp[a], fs[a]) and net.head[a] != v:
                return False
        return True


def _network_simplex(net, bal_p, bal_s, warm_arcs=None, max_pivots=None):
    narcs = len(net.cost)
    fp = np.zeros(narcs)
    fs = np.zeros(narcs)
    tree = None
    if warm_arcs is not None:
        flows = _tree_flows(net, warm_arcs, bal_p, bal_s)
        if flows is not None and not any(_lex_less(flows[0][a], flows[1][a], 0.0, 0.0) for a in flows[0]):
            for a in flows[0]:
                fp[a], fs[a] = flows[0][a], flows[1][a]
            cand = _Tree(net, warm_arcs)
            if cand.strongly_feasible(fp, fs):
                tree = cand
            else:
                fp[:], fs[:] = 0.0, 0.0
    if tree is None:
        K, M = net.K, net.M
        arcs = list(range(net.nreal, narcs))
        fp[net.nreal:net.nreal + K] = bal_p[:K]
        fs[net.nreal:net.nreal + K] = bal_s[:K]
        fp[net.nreal + K:] = -bal_p[K:K + M]
        fs[net.nreal + K:] = -bal_s[K:K + M]
        tree = _Tree(net, arcs)
    in_tree = np.zeros(narcs, dtype=bool)
    in_tree[list(tree.arcs)] = True
    scale = 1.0 + np.abs(net.cost[:net.nreal]).max(initial=0.0)
    rc_tol = 1e-11 * scale
    limit = max_pivots or 50 * narcs + 1000
    pivots = 0
    while True:
        rc = net.cost - tree.pot[net.tail] + tree.pot[net.head]
        rc[in_tree] = 0.0
        e = int(np.argmin(rc))
        if rc[e] >= -rc_tol:
            break
        pivots += 1
        if pivots > limit:
            raise NumericalFailure("network simplex pivot limit reached")
        u, v = net.tail[e], net.head[e]
        # climb to the apex, recording tree arcs on both sides
        up_u, up_v = [], []
        x, y = u, v
        while x != y:
            if tree.depth[x] >= tree.depth[y]:
                up_u.append(x)
                x = tree.parent[x]
            else:
                up_v.append(y)
                y = tree.parent[y]
        # cycle orientation from the apex: down to u, across e, up from v
        order = []
        for child in reversed(up_u):
            a = tree.parc[child]
            order.append((a, net.head[a] == child))
        for child in up_v:
            a = tree.parc[child]
            order.append((a, net.tail[a] == child))
        theta_p, theta_s = np.inf, np.inf
        leave = -1
        for a, forward in order:
            if forward:
                continue
            # last blocking arc along the orientation keeps the tree strongly feasible
            if not _lex_less(theta_p, theta_s, fp[a], fs[a]):
                theta_p, theta_s, leave = fp[a], fs[a], a
        if leave < 0:
            raise NumericalFailure("unbounded transportation problem")
        for a, forward in order:
            if forward:
                fp[a] += theta_p
                fs[a] += theta_s
            else:
                fp[a] -= theta_p
                fs[a] -= theta_s
        fp[e], fs[e] = theta_p, theta_s
        fp[leave], fs[leave] = 0.0, 0.0
        fp[np.abs(fp) <= FLOW_TOL] = 0.0
        in_tree[leave] = False
        in_tree[e] = True
        tree.pivot(e, leave)
    return tree, fp, fs, pivots


def _component_potentials(net, tree, C):
    """Duals without the big-M artificial arcs.

    Zero-flow artificial arcs may remain basic; they split the real tree arcs
    into components whose potentials are only fixed relative to each other.
    Each component is re-rooted at zero and the components are then shifted
    by a difference-constraint shortest path so every real arc stays dual
    feasible.
    """
    K, M = net.K, net.M
    real = [a for a in tree.arcs if a < net.nreal]
    comp = -np.ones(K + M, dtype=np.int64)
    adj = [[] for _ in range(K + M)]
    for a in real:
        adj[net.tail[a]].append(a)
        adj[net.head[a]].append(a)
    pot = np.zeros(K + M)
    ncomp = 0
    # visit demand nodes first so each component is rooted at its lowest demand node
    for start in list(range(K, K + M)) + list(range(K)):
        if comp[start] >= 0:
            continue
        comp[start] = ncomp
        pot[start] = 0.0
        stack = [start]
        while stack:
            x = stack.pop()
            for a in adj[x]:
                y = net.head[a] if net.tail[a] == x else net.tail[a]
                if comp[y] < 0:
                    comp[y] = ncomp
                    pot[y] = pot[x] - net.cost[a] if net.tail[a] == x else pot[x] + net.cost[a]
                    stack.append(y)
        ncomp += 1
    beta = pot[:K].copy()
    alpha = -pot[K:].copy()
    if ncomp > 1:
        ca = comp[:K][:, None].repeat(M, axis=1).ravel()
        cb = comp[K:][None, :].repeat(K, axis=0).ravel()
        rc = (C - beta[:, None] - alpha[None, :]).ravel()
        # rounding makes zero-cost cycles look slightly negative; they must not drive the shifts
        rc[(rc < 0) & (rc > -1e-9 * max(1.0, np.abs(C).max()))] = 0.0
        shift = np.zeros(ncomp)
        for _ in range(ncomp + 1):
            cand = shift[cb] + rc
            new = shift.copy()
            np.minimum.at(new, ca, cand)
            if np.array_equal(new, shift):
                break
            shift = new
        else:
            raise NumericalFailure("inconsistent dual shifts")
        beta += shift[comp[:K]]
        alpha -= shift[comp[K:]]
    return alpha, beta


def solve_transport(problem: TransportProblem, warm_tree=None, max_pivots=None):
    """Optimal flow and duals of a balanced transportation problem.

    Returns ``(flow, DualPair)``. Nodes with zero weight in both components are
    left out of the network; their duals are set to the largest feasible values
    afterwards. Duals are shifted so that ``min(alpha) == 0``.
    """
    C = problem.cost
    Kall, Mall = C.shape
    s_p, s_s = problem.supply.copy(), problem.supply2.copy()
    t_p, t_s = problem.demand.copy(), problem.demand2.copy()
    for arr in (s_p, s_s, t_p, t_s):
        arr[arr < 0] = 0.0
    # absorb rounding imbalance into the largest entry
    for s, t in ((s_p, t_p), (s_s, t_s)):
        gap = s.sum() - t.sum()
        if gap and t.size:
            t[np.argmax(t)] += gap
            if t.min() < 0:
                s[np.argmax(s)] -= gap
                t[np.argmax(t)] -= gap
    ks = np.flatnonzero((s_p > 0) | (s_s > 0))
    ms = np.flatnonzero((t_p > 0) | (t_s > 0))
    flow = np.zeros((Kall, Mall))
    alpha = np.zeros(Mall)
    beta = np.zeros(Kall)
    tree_pairs = []
    pivots = 0
    if ks.size and ms.size:
        sub = C[np.ix_(ks, ms)]
        K, M = sub.shape
        big_m = 1.0 + (K + M) * max(1.0, np.abs(sub).max())
        net = _Network(sub, big_m)
        bal_p = np.concatenate([s_p[ks], -t_p[ms], [0.0]])
        bal_s = np.concatenate([s_s[ks], -t_s[ms], [0.0]])
        warm = None
        if warm_tree is not None:
            kpos = {int(k): a for a, k in enumerate(ks)}
            mpos = {int(m): a for a, m in enumerate(ms)}
            warm = []
            for k, m in warm_tree:
                if k in kpos and m in mpos:
                    warm.append(kpos[k] * M + mpos[m])
            # complete with artificial arcs when the stored tree touches missing nodes
            warm = _complete_tree(net, warm)
        else:
            warm = _complete_tree(net, _greedy_tree(net, bal_p, bal_s))
        tree, fp, fs, pivots = _network_simplex(net, bal_p, bal_s, warm, max_pivots)
        art = slice(net.nreal, None)
        if np.any(fp[art] > 1e-9) or np.any(fs[art] > 1e-9):
            raise NumericalFailure("artificial arc carries flow at optimum")
        flow[np.ix_(ks, ms)] = fp[:net.nreal].reshape(K, M)
        a_sub, b_sub = _component_potentials(net, tree, sub)
        alpha[ms], beta[ks] = a_sub, b_sub
        tree_pairs = sorted((int(ks[a // M]), int(ms[a % M])) for a in tree.arcs if a < net.nreal)
        # extend duals to zero-weight nodes
        k_in = np.zeros(Kall, dtype=bool)
        k_in[ks] = True
        m_in = np.zeros(Mall, dtype=bool)
        m_in[ms] = True
        ks_out = np.flatnonzero(~k_in)
        ms_out = np.flatnonzero(~m_in)
        if ks_out.size:
            beta[ks_out] = (C[np.ix_(ks_out, ms)] - alpha[ms][None, :]).min(axis=1)
        if ms_out.size:
            alpha[ms_out] = (C[:, ms_out] - beta[:, None]).min(axis=0)
        shift = alpha.min()
        alpha -= shift
        beta += shift
    value = float(problem.demand @ alpha + problem.supply @ beta)
    value2 = float(problem.demand2 @ alpha + problem.supply2 @ beta)
    return flow, DualPair(alpha, beta, value, value2, tree_pairs, pivots)


def _greedy_tree(net, bal_p, bal_s):
    """Real arcs of a lexicographic least-cost allocation (a forest of positive-flow arcs)."""
    K, M = net.K, net.M
    sp, ss = bal_p[:K].copy(), bal_s[:K].copy()
    dp, ds = -bal_p[K:K + M], -bal_s[K:K + M]
    arcs = []
    for a in np.argsort(net.cost[:net.nreal], kind="stable"):
        k, m = divmod(int(a), M)
        if not (_lex_positive(sp[k], ss[k]) and _lex_positive(dp[m], ds[m])):
            continue
        if _lex_less(sp[k], ss[k], dp[m], ds[m]):
            xp, xs = sp[k], ss[k]
        else:
            xp, xs = dp[m], ds[m]
        sp[k] -= xp
        ss[k] -= xs
        dp[m] -= xp
        ds[m] -= xs
        arcs.append(int(a))
    return arcs


def _complete_tree(net, real_arcs):
    """Add artificial arcs so ``real_arcs`` (assumed acyclic) becomes a spanning tree."""
    nnodes = net.root + 1
    parent = list(range(nnodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    arcs = []
    for a in real_arcs:
        ra, rb = find(net.tail[a]), find(net.head[a])
        if ra == rb:
            return None
        parent[ra] = rb
        arcs.append(a)
    # demand-side artificial arcs point away from the root, so prefer them
    for v in list(range(net.K, net.root)) + list(range(net.K)):
        ra, rb = find(v), find(net.root)
        if ra != rb:
            parent[ra] = rb
            arcs.append(net.nreal + v)  # artificial arc of node v
    return arcs


def transport_lp(problem: TransportProblem):
    """The same transportation problem as an :class:`~qploc.lpcore.LpModel` (for cross-checks)."""
    from .lpcore import LpModel
    K, M = problem.cost.shape
    model = LpModel("min")
    x = model.add_variables(K * M, lb=0.0, obj=problem.cost.ravel())
    for k in range(K):
        model.add_row(x[k * M:(k + 1) * M], 1.0, "E", problem.supply[k])
    for m in range(M):
        model.add_row(x[m::M], 1.0, "E", problem.demand[m])
    return model


# ---------------------------------------------------------------------------
# Benders separation
# ---------------------------------------------------------------------------

@dataclass
class BendersCut:
    """Aggregated optimality cut ``eta >= sum(g * z)``."""

    g: np.ndarray
    iteration: int = -1
    point_hash: str = ""
    value_at_point: float = 0.0

    def evaluate(self, z):
        return float(np.sum(self.g * z))


def separate_pair(i, j, zbar, z0, cost, delta=None, warm_tree=None):
    """Duals of the pair subproblem ``(i, j)`` at ``zbar`` using core point ``z0``.

    ``cost[k, m] = q(i, k, j, m)``. By default the core point only breaks
    ties among optimal duals (lexicographic solve). Passing a number ``delta``
    instead solves one transportation problem with weights ``z0 + delta * zbar``.
    """
    zi, zj = np.asarray(zbar[i], dtype=float), np.asarray(zbar[j], dtype=float)
    oi, oj = np.asarray(z0[i], dtype=float), np.asarray(z0[j], dtype=float)
    if delta is None:
        prob = TransportProblem(zi, zj, cost, oi, oj)
    else:
        prob = TransportProblem(oi + delta * zi, oj + delta * zj, cost)
    _, duals = solve_transport(prob, warm_tree=warm_tree)
    duals.value = float(zj @ duals.alpha + zi @ duals.beta)
    duals.value2 = float(oj @ duals.alpha + oi @ duals.beta)
    return duals


def _row_key(*rows):
    return b"".join(np.ascontiguousarray(r, dtype=float).tobytes() for r in rows)


def separate_all(zbar, z0, inst, nodes=None, workers=1, delta=None, cache=None, shortcut=True,
                 deadline=None):
    """Aggregated cut and subproblem value ``sum_{i<j} Gamma_ij(zbar)``.

    ``nodes`` optionally restricts the facility columns considered (the
    reduced candidate set); columns outside it must be zero in ``zbar`` and
    ``z0``. For flow-distance costs with symmetric distances, pairs share one
    unscaled problem per distinct pair of rows (``shortcut``). Pair results
    are memoized in ``cache`` (a dict that may be reused across calls).
    Raises :class:`~qploc.errors.TimeLimit` once ``time.perf_counter()``
    passes ``deadline``.
    """
    zbar = np.asarray(zbar, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    n = inst.n
    q = inst.q
    cols = np.arange(n) if nodes is None else np.asarray(sorted(nodes), dtype=np.int64)
    I, J = np.triu_indices(n, 1)
    active = np.flatnonzero(q.active_pairs())
    factorized = getattr(q, "kind", "") == "factorized" and q.symmetric_dist and shortcut
    if factorized:
        base_cost = q.tau * q.dist[np.ix_(cols, cols)]
        weights = q.pair_weights()
    if cache is None:
        cache = {}
    col_key = cols.tobytes() + repr(delta).encode()

    def work(p):
        if deadline is not None and time.perf_counter() > deadline:
            raise TimeLimit("separation stopped at the time limit")
        i, j = int(I[p]), int(J[p])
        zi, zj = zbar[i, cols], zbar[j, cols]
        oi, oj = z0[i, cols], z0[j, cols]
        if factorized:
            key = _row_key(zi, oi, zj, oj) + col_key
            hit = cache.get(key)
            if hit is None:
                hit = separate_pair(0, 1, np.vstack([zi, zj]), np.vstack([oi, oj]), base_cost, delta)
                cache[key] = hit
            w = weights[p]
            return i, j, hit.alpha * w, hit.beta * w, hit.value * w
        key = b"%d,%d:" % (i, j) + _row_key(zi, oi, zj, oj) + col_key
        dp = cache.get(key)
        if dp is None:
            cost = q.pair_cost(i, j)[np.ix_(cols, cols)]
            dp = separate_pair(0, 1, np.vstack([zi, zj]), np.vstack([oi, oj]), cost, delta)
            cache[key] = dp
        return i, j, dp.alpha, dp.beta, dp.value

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, active))
    else:
        results = [work(p) for p in active]
    g = np.zeros((n, n))
    total = 0.0
    for i, j, alpha, beta, value in results:  # fixed pair order keeps the sum deterministic
        g[i, cols] += beta
        g[j, cols] += alpha
        total += value
    return BendersCut(g, value_at_point=total), total
