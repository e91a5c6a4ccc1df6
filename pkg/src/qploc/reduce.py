"""Problem reductions driven by the incumbent value.

``eliminate`` closes facilities whose reduced cost proves that opening them
cannot beat the incumbent. ``partial_enumeration`` probes single facilities
by fixing ``z[k, k]`` and re-solving the master LP:

* ``PE0`` tries facilities with ``zbar[k, k] <= 0.2`` fixed open and closes
  them when the probe bound exceeds the incumbent (or the probe is infeasible);
* ``PE1`` tries facilities with ``zbar[k, k] >= 0.8`` fixed closed and fixes
  them open when the probe bound exceeds the incumbent.

Probes never touch ``state.result``, so the caller's LP point stays valid.
A sweep raises :class:`~qploc.errors.TimeLimit` when the state's time limit passes.
"""
from __future__ import annotations

import math

from .lpcore import INFEASIBLE

PE0_THRESHOLD = 0.2
PE1_THRESHOLD = 0.8
REL_TOL = 1e-6


def beats_incumbent(bound, ub):
    """True when ``bound`` is provably worse than the incumbent value ``ub``."""
    return bound > ub + REL_TOL * abs(ub)


def eliminate(state):
    """Close facilities with ``z[k, k] = 0`` in the LP and ``LB + rc > UB``; returns the closed set."""
    res = state.result
    if res is None or res.reduced_costs is None or not math.isfinite(state.ub):
        return set()
    closed = set()
    lb = res.objective
    for k in state.candidates:
        if k in state.fixed_open:
            continue
        j = int(state.z[k, k])
        if res.x[j] > 1e-9:
            continue
        rc = float(res.reduced_costs[j])
        if rc > 0 and beats_incumbent(lb + rc, state.ub):
            closed.add(k)
    if len(closed) >= len(state.candidates):
        return set()
    for k in sorted(closed):
        state.close_facility(k)
    state.stats["eliminated"] += len(closed)
    return closed


def _probe(state, k, value):
    """Master LP bound with ``z[k, k]`` fixed to ``value`` (``inf`` if infeasible)."""
    j = int(state.z[k, k])
    state.model.fix_variable(j, value)
    try:
        res = state.raw_solve()
    finally:
        state.model.unfix_variable(j)
    if res.status == INFEASIBLE:
        return math.inf
    if not res.optimal:
        return -math.inf    # inconclusive: never fix on failure
    return res.objective


def partial_enumeration(state, mode="PE0"):
    """Run one ``PE0`` or ``PE1`` sweep; returns the set of facilities closed or fixed open."""
    if not math.isfinite(state.ub) or state.result is None:
        return set()
    zbar = state.zbar()
    changed = set()
    for k in list(state.candidates):
        if k in state.fixed_open:
            continue
        state.check_time()
        if mode == "PE0":
            if zbar[k, k] > PE0_THRESHOLD or len(state.candidates) <= 1:
                continue
            if beats_incumbent(_probe(state, k, 1.0), state.ub):
                state.close_facility(k)
                changed.add(k)
                state.stats["pe0"] += 1
        elif mode == "PE1":
            if zbar[k, k] < PE1_THRESHOLD:
                continue
            if beats_incumbent(_probe(state, k, 0.0), state.ub):
                state.open_facility(k)
                changed.add(k)
                state.stats["pe1"] += 1
        else:
            raise ValueError(f"unknown partial enumeration mode {mode!r}")
    return changed
