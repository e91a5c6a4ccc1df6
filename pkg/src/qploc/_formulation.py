"""Location constraints shared by the master LP, the RLT models and the RLF MILP."""
from __future__ import annotations

import numpy as np


def add_location_constraints(model, inst, z, columns=None):
    """Add assignment, linking, cardinality and capacity rows over ``z[i, k]`` variable ids.

    ``columns`` restricts the candidate facilities; assignment rows then only
    sum over those columns. Returns a dict of row id lists per family.
    """
    n = inst.n
    cols = np.arange(n) if columns is None else np.asarray(sorted(columns), dtype=np.int64)
    rows = {"assign": [], "link": [], "card": [], "cap": []}
    for i in range(n):
        rows["assign"].append(model.add_row(z[i, cols], 1.0, "E", 1.0, name=f"assign_{i}"))
    for k in cols:
        for i in range(n):
            if i != k:
                rows["link"].append(model.add_row([z[i, k], z[k, k]], [1.0, -1.0], "L", 0.0,
                                                  name=f"link_{i}_{k}"))
    if inst.cardinality_bounded:
        rows["card"].append(model.add_row(z[cols, cols], 1.0, "L", float(inst.p), name="card"))
    if inst.capacitated:
        bbar = inst.bbar
        for k in cols:
            others = np.array([i for i in range(n) if i != k], dtype=np.int64)
            idx = np.concatenate([z[others, k], [z[k, k]]])
            val = np.concatenate([inst.d[others], [-bbar[k]]])
            rows["cap"].append(model.add_row(idx, val, "L", 0.0, name=f"cap_{k}"))
    return rows
