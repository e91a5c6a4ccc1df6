"""Random instance generators.

``random_instance`` produces small instances with arbitrary dense interaction
tensors (used as oracle fodder). ``generate_set1`` produces large hub-network
instances whose node outflows fall into three magnitude classes.

Setup costs and capacities of ``generate_set1`` are defined here, not taken
from any benchmark:

* ``f[k] = F * sqrt((O_k + D_k) / mean(O + D)) * m_f`` with
  ``F = (chi + delta) * sum(O) * mean(dist) / n`` and ``m_f`` = 1.0 for loose
  (``"L"``) or 1.5 for tight (``"T"``) setup costs;
* ``b[k] = max(m_b * sum(d) / h, d[k])`` with ``h = max(2, round(sqrt(n) / 2))``
  expected open hubs and ``m_b`` = 1.5 (loose) or 1.1 (tight).

Optimal values of these instances are self-benchmarks only.
"""
from __future__ import annotations

import numpy as np

from .instance import (DenseQuad, Instance, build_ap_costs, num_pairs,
                       uncapacitated_capacities)

# Share of HL / ML nodes; the remainder are LL nodes.
SET1_SHARES = (0.02, 0.38)
SET1_RANGES = {"HL": (100.0, 1000.0), "ML": (10.0, 100.0), "LL": (1.0, 10.0)}
SETUP_MULT = {"L": 1.0, "T": 1.5}
CAPACITY_MULT = {"L": 1.5, "T": 1.1}


def random_instance(n, seed=None, *, capacitated=False, p=None, setup=True,
                    qmax=10.0, density=1.0, cap_slack=(0.3, 1.1)):
    """Small random instance with a dense, unstructured interaction tensor.

    ``density`` is the probability that a given ``q(i, k, j, m)`` is nonzero.
    Capacities (when ``capacitated``) are ``d[k]`` plus a uniform fraction of
    the total demand drawn from ``cap_slack``; such instances can be
    infeasible for small ``p``.
    """
    rng = np.random.default_rng(seed)
    f = rng.uniform(20.0, 60.0, n) if setup else np.zeros(n)
    c = rng.uniform(0.0, 20.0, (n, n))
    np.fill_diagonal(c, 0.0)
    d = rng.integers(1, 11, n).astype(float)
    slices = rng.uniform(0.0, qmax, (num_pairs(n), n, n))
    if density < 1.0:
        slices *= rng.random(slices.shape) < density
    if capacitated:
        b = d + rng.uniform(*cap_slack, n) * d.sum()
    else:
        b = uncapacitated_capacities(d)
    return Instance(f=f, b=b, d=d, c=c, q=DenseQuad(slices), p=n if p is None else p,
                    capacitated=capacitated, name=f"rand{n}s{seed}")


def set1_class_counts(n):
    """Number of (HL, ML, LL) nodes; rounding leftovers go to LL."""
    hl = int(round(SET1_SHARES[0] * n))
    ml = int(round(SET1_SHARES[1] * n))
    return hl, ml, n - hl - ml


def generate_set1(n, seed=None, setup="L", capacity="L", *, capacitated=True, p=None,
                  chi=2.0, tau=0.75, delta=3.0):
    """Hub-network instance with LL/ML/HL outflow classes on random planar points."""
    if n < 10:
        raise ValueError("generate_set1 needs n >= 10")
    setup, capacity = setup.upper(), capacity.upper()
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, 100.0, (n, 2))
    hl, ml, ll = set1_class_counts(n)
    classes = np.array(["HL"] * hl + ["ML"] * ml + ["LL"] * ll)
    classes = classes[rng.permutation(n)]
    outflow = np.empty(n)
    for name, (lo, hi) in SET1_RANGES.items():
        mask = classes == name
        outflow[mask] = rng.uniform(lo, hi, mask.sum())
    share = rng.random((n, n))
    np.fill_diagonal(share, 0.0)
    w = outflow[:, None] * share / share.sum(axis=1, keepdims=True)
    c, q = build_ap_costs(coords=coords, w=w, chi=chi, tau=tau, delta=delta)
    out_flow = w.sum(axis=1)
    through = out_flow + w.sum(axis=0)
    scale = (chi + delta) * out_flow.sum() * q.dist.mean() / n
    f = scale * np.sqrt(through / through.mean()) * SETUP_MULT[setup]
    d = out_flow
    if capacitated:
        hubs = max(2, int(round(np.sqrt(n) / 2)))
        b = np.maximum(CAPACITY_MULT[capacity] * d.sum() / hubs, d)
    else:
        b = uncapacitated_capacities(d)
    inst = Instance(f=f, b=b, d=d, c=c, q=q, p=n if p is None else p,
                    capacitated=capacitated, name=f"set1-{n}{setup}{capacity}-s{seed}")
    return inst, classes
