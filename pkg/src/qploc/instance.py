"""Problem data, solutions and objective evaluation.

An instance of the quadratic capacitated p-location problem with single
assignments is described by

* ``f[k]``  setup cost of opening facility ``k``
* ``b[k]``  capacity of facility ``k`` (it always serves its own demand)
* ``d[i]``  demand of node ``i``
* ``c[i, k]`` linear cost of assigning ``i`` to ``k``
* ``q``     interaction cost ``q(i, k, j, m)`` paid when ``i -> k`` and
  ``j -> m`` (only ``i < j`` is stored)
* ``p``     maximum number of open facilities.

A solution is an assignment vector ``a`` with ``a[k] == k`` exactly for the
open facilities.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, InfeasibleSolution

# Dense interaction tensors above this size are refused; use FactorizedQuad.
DENSE_MAX_N = 60


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index_matrix(n: int) -> np.ndarray:
    """``P[i, j]`` is the position of the unordered pair ``{i, j}`` (``-1`` on the diagonal)."""
    P = -np.ones((n, n), dtype=np.int64)
    iu, ju = np.triu_indices(n, 1)
    P[iu, ju] = np.arange(len(iu))
    P[ju, iu] = P[iu, ju]
    return P


class DenseQuad:
    """Explicit interaction costs, one ``n x n`` slice per pair ``i < j``.

    ``slices[pair(i, j)][k, m] == q(i, k, j, m)``.
    """

    kind = "dense"

    def __init__(self, slices):
        slices = np.array(slices, dtype=float)
        if slices.ndim != 3 or slices.shape[1] != slices.shape[2]:
            raise DimensionMismatch(f"dense slices must have shape (P, n, n), got {slices.shape}")
        n = slices.shape[1]
        if slices.shape[0] != num_pairs(n):
            raise DimensionMismatch(f"expected {num_pairs(n)} pair slices for n={n}, got {slices.shape[0]}")
        if n > DENSE_MAX_N:
            raise DimensionMismatch(f"dense interaction costs limited to n <= {DENSE_MAX_N}; use FactorizedQuad")
        if np.any(slices < 0) or not np.all(np.isfinite(slices)):
            raise ValueError("interaction costs must be finite and nonnegative")
        slices.setflags(write=False)
        self.n = n
        self.slices = slices
        self.pair_index = pair_index_matrix(n)
        self._I, self._J = np.triu_indices(n, 1)
        self._active = slices.reshape(len(slices), n * n).any(axis=1)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((num_pairs(n), n, n)))

    @classmethod
    def from_full(cls, q4):
        """Build from a full ``(n, n, n, n)`` tensor ``q4[i, k, j, m]``; entries with ``i >= j`` are ignored."""
        q4 = np.asarray(q4, dtype=float)
        n = q4.shape[0]
        if q4.shape != (n, n, n, n):
            raise DimensionMismatch(f"expected (n, n, n, n) tensor, got {q4.shape}")
        I, J = np.triu_indices(n, 1)
        return cls(q4[I, :, J, :])

    def value(self, i, k, j, m):
        if i == j:
            raise ValueError("interaction cost undefined for i == j")
        if i > j:
            i, k, j, m = j, m, i, k
        return float(self.slices[self.pair_index[i, j], k, m])

    def pair_cost(self, i, j):
        """Cost matrix ``C[k, m] = q(i, k, j, m)``; rows follow node ``i``."""
        s = self.slices[self.pair_index[i, j]]
        return s if i < j else s.T

    def active_pairs(self):
        """Boolean mask over pairs (``triu_indices`` order) with a nonzero slice."""
        return self._active

    def total(self, assign):
        a = np.asarray(assign)
        if len(self._I) == 0:
            return 0.0
        return float(self.slices[np.arange(len(self._I)), a[self._I], a[self._J]].sum())

    def node_costs(self, assign, i):
        """Vector over ``k``: interaction cost of all terms touching ``i`` if ``i -> k``."""
        a = np.asarray(assign)
        n = self.n
        out = np.zeros(n)
        if i + 1 < n:
            pj = self.pair_index[i, i + 1:]
            out += self.slices[pj, :, a[i + 1:]].sum(axis=0)
        if i > 0:
            pj = self.pair_index[:i, i]
            out += self.slices[pj, a[:i], :].sum(axis=0)
        return out

    def scaled(self, lam):
        return DenseQuad(self.slices * lam)

    def to_dense(self):
        return self

    def __eq__(self, other):
        return isinstance(other, DenseQuad) and np.array_equal(self.slices, other.slices)

    __hash__ = None


class FactorizedQuad:
    """Flow x distance interaction costs used by hub location models.

    For ``i < j``: ``q(i, k, j, m) = tau * (w[i, j] * dist[k, m] + w[j, i] * dist[m, k])``,
    so the flow in both directions of an unordered pair is charged once.
    ``chi`` and ``delta`` are kept only as provenance for the linear costs.
    """

    kind = "factorized"

    def __init__(self, w, dist, tau=0.75, chi=2.0, delta=3.0):
        w = np.array(w, dtype=float)
        dist = np.array(dist, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or dist.shape != w.shape:
            raise DimensionMismatch(f"flow {w.shape} and distance {dist.shape} must be equal square matrices")
        if np.any(w < 0) or np.any(dist < 0):
            raise ValueError("flows and distances must be nonnegative")
        w.setflags(write=False)
        dist.setflags(write=False)
        self.n = w.shape[0]
        self.w = w
        self.dist = dist
        self.tau = float(tau)
        self.chi = float(chi)
        self.delta = float(delta)
        self.symmetric_dist = bool(np.array_equal(dist, dist.T))
        self._I, self._J = np.triu_indices(self.n, 1)
        self._pair_weight = w[self._I, self._J] + w[self._J, self._I]
        self._wdiag = np.diag(w).copy()

    def value(self, i, k, j, m):
        if i == j:
            raise ValueError("interaction cost undefined for i == j")
        if i > j:
            i, k, j, m = j, m, i, k
        return self.tau * (self.w[i, j] * self.dist[k, m] + self.w[j, i] * self.dist[m, k])

    def pair_cost(self, i, j):
        if i > j:
            return self.pair_cost(j, i).T
        return self.tau * (self.w[i, j] * self.dist + self.w[j, i] * self.dist.T)

    def active_pairs(self):
        return self._pair_weight > 0

    def pair_weights(self):
        """``w[i, j] + w[j, i]`` for each pair, in ``triu_indices`` order."""
        return self._pair_weight

    def total(self, assign):
        a = np.asarray(assign)
        sub = self.dist[np.ix_(a, a)]
        return float(self.tau * (np.sum(self.w * sub) - np.dot(self._wdiag, np.diag(sub))))

    def node_costs(self, assign, i):
        a = np.asarray(assign)
        wi = self.w[i].copy()
        wc = self.w[:, i].copy()
        wi[i] = 0.0
        wc[i] = 0.0
        return self.tau * (self.dist[:, a] @ wi + self.dist[a, :].T @ wc)

    def scaled(self, lam):
        return FactorizedQuad(self.w * lam, self.dist, self.tau, self.chi, self.delta)

    def to_dense(self):
        I, J = self._I, self._J
        slices = self.tau * (self.w[I, J][:, None, None] * self.dist[None, :, :]
                             + self.w[J, I][:, None, None] * self.dist.T[None, :, :])
        return DenseQuad(slices)

    def __eq__(self, other):
        return (isinstance(other, FactorizedQuad) and np.array_equal(self.w, other.w)
                and np.array_equal(self.dist, other.dist)
                and (self.tau, self.chi, self.delta) == (other.tau, other.chi, other.delta))

    __hash__ = None


def _frozen(x, shape=None, name="array"):
    arr = np.array(x, dtype=float)
    if shape is not None and arr.shape != shape:
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    f: np.ndarray
    b: np.ndarray
    d: np.ndarray
    c: np.ndarray
    q: DenseQuad | FactorizedQuad
    p: int
    capacitated: bool = True
    name: str = ""

    def __post_init__(self):
        n = self.q.n
        object.__setattr__(self, "f", _frozen(self.f, (n,), "setup costs"))
        object.__setattr__(self, "b", _frozen(self.b, (n,), "capacities"))
        object.__setattr__(self, "d", _frozen(self.d, (n,), "demands"))
        object.__setattr__(self, "c", _frozen(self.c, (n, n), "linear costs"))
        p = int(self.p)
        if p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        object.__setattr__(self, "p", min(p, n))
        for label, arr in (("setup costs", self.f), ("capacities", self.b),
                           ("demands", self.d), ("linear costs", self.c)):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{label} must be finite and nonnegative")

    @property
    def n(self) -> int:
        return self.q.n

    @property
    def bbar(self) -> np.ndarray:
        """Capacity left for other nodes once a facility serves itself."""
        return self.b - self.d

    @property
    def cardinality_bounded(self) -> bool:
        return self.p < self.n

    @property
    def variant(self) -> str:
        cap = "capacitated" if self.capacitated else "uncapacitated"
        card = "cardinality" if self.cardinality_bounded else "free"
        return f"{cap}/{card}"

    def replace(self, **changes) -> "Instance":
        return dataclasses.replace(self, **changes)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.p == other.p and self.capacitated == other.capacitated
                and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in "fbdc")
                and self.q == other.q)

    __hash__ = None


def uncapacitated_capacities(d):
    """Capacities that can never bind: ``b[k] = sum(d) + d[k]``."""
    d = np.asarray(d, dtype=float)
    return d.sum() + d


VARIANTS = {
    # name: (setup costs active, capacitated, cardinality bounded)
    "uhlpsa": (True, False, False),
    "uphmpsa": (False, False, True),
    "chlpsa": (True, True, False),
    "cphmpsa": (False, True, True),
}


def apply_variant(inst: Instance, variant: str, p: int | None = None) -> Instance:
    """Configure ``inst`` as one of the four hub location special cases."""
    try:
        setup, cap, card = VARIANTS[variant.lower()]
    except KeyError:
        raise ValueError(f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}") from None
    if card:
        if p is None:
            raise ValueError(f"variant {variant} needs p")
    else:
        p = inst.n
    f = inst.f if setup else np.zeros(inst.n)
    b = inst.b if cap else uncapacitated_capacities(inst.d)
    return inst.replace(f=f, b=b, p=p, capacitated=cap)


class CostBreakdown(NamedTuple):
    setup: float
    linear: float
    quadratic: float
    total: float


@dataclass(frozen=True)
class Solution:
    """Single-assignment solution; node ``k`` is an open facility iff ``assign[k] == k``."""

    assign: tuple

    def __post_init__(self):
        object.__setattr__(self, "assign", tuple(int(v) for v in self.assign))

    @property
    def n(self):
        return len(self.assign)

    @property
    def open(self) -> tuple:
        return tuple(k for k, a in enumerate(self.assign) if a == k)

    def as_array(self):
        return np.array(self.assign, dtype=np.int64)

    def to_z(self):
        n = self.n
        z = np.zeros((n, n))
        z[np.arange(n), self.assign] = 1.0
        return z

    @classmethod
    def from_z(cls, z, tol=1e-6):
        z = np.asarray(z, dtype=float)
        a = np.argmax(z, axis=1)
        if np.any(np.abs(z - (np.arange(z.shape[1])[None, :] == a[:, None])) > tol):
            raise InfeasibleSolution("z is not integral")
        return cls(a)


def check_solution(inst: Instance, sol: Solution) -> None:
    """Raise :class:`InfeasibleSolution` naming the first violated rule."""
    n = inst.n
    if sol.n != n:
        raise InfeasibleSolution(f"solution has {sol.n} nodes, instance has {n}")
    a = sol.as_array()
    if np.any(a < 0) or np.any(a >= n):
        raise InfeasibleSolution("assignment index out of range")
    for i in range(n):
        if a[a[i]] != a[i]:
            raise InfeasibleSolution(f"node {i} assigned to {a[i]}, which is not an open facility")
    H = sol.open
    if len(H) > inst.p:
        raise InfeasibleSolution(f"{len(H)} open facilities exceed p={inst.p}")
    if inst.capacitated:
        bbar = inst.bbar
        for k in H:
            load = inst.d[(a == k) & (np.arange(n) != k)].sum()
            if load > bbar[k] + 1e-9 * max(1.0, abs(bbar[k])):
                raise InfeasibleSolution(f"facility {k} serves {load} > available capacity {bbar[k]}")


def evaluate(inst: Instance, sol: Solution, check: bool = True) -> CostBreakdown:
    if check:
        check_solution(inst, sol)
    a = sol.as_array()
    setup = float(inst.f[list(sol.open)].sum())
    linear = float(inst.c[np.arange(inst.n), a].sum())
    quad = inst.q.total(a)
    return CostBreakdown(setup, linear, quad, setup + linear + quad)


def euclidean(coords):
    coords = np.asarray(coords, dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def build_ap_costs(dist=None, w=None, chi=2.0, tau=0.75, delta=3.0, *, coords=None):
    """Linear and interaction costs of a hub network from distances and flows.

    Returns ``(c, q)`` with ``c[i, k] = (chi*O_i + delta*D_i) * dist[i, k]`` and
    ``q`` a :class:`FactorizedQuad`. Give ``coords`` (``n x 2``) instead of
    ``dist`` to use Euclidean distances.
    """
    if coords is not None:
        if dist is not None:
            raise ValueError("give either dist or coords, not both")
        dist = euclidean(coords)
    dist = np.asarray(dist, dtype=float)
    w = np.asarray(w, dtype=float)
    if dist.ndim != 2 or dist.shape != w.shape or w.shape[0] != w.shape[1]:
        raise DimensionMismatch(f"distance {dist.shape} and flow {w.shape} matrices must be equal and square")
    out_flow, in_flow = flow_totals(w)
    c = (chi * out_flow + delta * in_flow)[:, None] * dist
    return c, FactorizedQuad(w, dist, tau=tau, chi=chi, delta=delta)


def flow_totals(w):
    """Originating and destined flow per node (``O_i``, ``D_i``)."""
    w = np.asarray(w, dtype=float)
    return w.sum(axis=1), w.sum(axis=0)
