"""Instance text format.

::

    # comments start with '#'
    <n> <p> <capacitated|uncapacitated>
    SETUP      n values
    CAPACITY   n values
    DEMAND     n values
    LINEAR     n*n values, row-major c[i, k]
    UNITS      chi tau delta          (factorized only)
    DIST       n*n values              (factorized only)
    FLOW       n*n values              (factorized only)
    QDENSE     n(n-1)/2 blocks of n*n  (dense only; pairs (0,1), (0,2), ..., (n-2,n-1))
    END

Values are whitespace separated and may wrap across lines. Floats are written
with ``repr`` so a save/load round trip is exact. ``LINEAR`` may be omitted for
factorized instances, in which case it is rebuilt from ``UNITS``/``DIST``/``FLOW``.

:func:`read_ap` reads raw hub data instead: ``n``, ``n`` coordinate pairs, the
``n x n`` flow matrix and, optionally, ``n`` trailing ``setup capacity`` pairs.
"""
from __future__ import annotations

import io
import os

import numpy as np

from .errors import ParseError
from .instance import (DenseQuad, FactorizedQuad, Instance, build_ap_costs,
                       num_pairs, uncapacitated_capacities)

SECTIONS = ("SETUP", "CAPACITY", "DEMAND", "LINEAR", "UNITS", "DIST", "FLOW", "QDENSE")


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def dumps(inst: Instance) -> str:
    n = inst.n
    out = io.StringIO()
    if inst.name:
        out.write(f"# {inst.name}\n")
    out.write(f"{n} {inst.p} {'capacitated' if inst.capacitated else 'uncapacitated'}\n")
    for label, arr in (("SETUP", inst.f), ("CAPACITY", inst.b), ("DEMAND", inst.d)):
        out.write(f"{label}\n{_fmt(arr)}\n")
    out.write("LINEAR\n")
    for row in inst.c:
        out.write(_fmt(row) + "\n")
    q = inst.q
    if isinstance(q, FactorizedQuad):
        out.write(f"UNITS\n{_fmt([q.chi, q.tau, q.delta])}\n")
        out.write("DIST\n")
        for row in q.dist:
            out.write(_fmt(row) + "\n")
        out.write("FLOW\n")
        for row in q.w:
            out.write(_fmt(row) + "\n")
    else:
        out.write("QDENSE\n")
        for block in q.slices:
            for row in block:
                out.write(_fmt(row) + "\n")
    out.write("END\n")
    return out.getvalue()


def save_instance(inst: Instance, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(inst))


class _Tokens:
    def __init__(self, text):
        self.items = []  # (token, line number)
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0]
            self.items.extend((tok, lineno) for tok in line.split())
        self.pos = 0

    def peek(self):
        return self.items[self.pos] if self.pos < len(self.items) else (None, None)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok


def _read_numbers(tokens, count, section):
    values = np.empty(count)
    for idx in range(count):
        tok, line = tokens.peek()
        if tok is None or tok.upper() in SECTIONS or tok.upper() == "END":
            raise ParseError(f"section {section} truncated: expected {count} values, got {idx}",
                             line=line, field=section)
        tokens.next()
        try:
            values[idx] = float(tok)
        except ValueError:
            raise ParseError(f"bad number {tok!r} in section {section}", line=line, field=section) from None
    return values


def loads(text: str, name: str = "") -> Instance:
    tokens = _Tokens(text)
    header = [tokens.next() for _ in range(3)]
    if any(tok is None for tok, _ in header):
        raise ParseError("missing header '<n> <p> <variant>'", line=1, field="header")
    try:
        n, p = int(header[0][0]), int(header[1][0])
    except ValueError:
        raise ParseError("header must start with integers n and p", line=header[0][1], field="header") from None
    variant = header[2][0].lower()
    if variant not in ("capacitated", "uncapacitated"):
        raise ParseError(f"unknown variant {variant!r}", line=header[2][1], field="variant")
    sizes = {"SETUP": n, "CAPACITY": n, "DEMAND": n, "LINEAR": n * n, "UNITS": 3,
             "DIST": n * n, "FLOW": n * n, "QDENSE": num_pairs(n) * n * n}
    data = {}
    while True:
        tok, line = tokens.next()
        if tok is None or tok.upper() == "END":
            break
        key = tok.upper()
        if key not in sizes:
            raise ParseError(f"unexpected token {tok!r}; expected a section name", line=line)
        if key in data:
            raise ParseError(f"duplicate section {key}", line=line, field=key)
        data[key] = _read_numbers(tokens, sizes[key], key)
    for key in ("SETUP", "CAPACITY", "DEMAND"):
        if key not in data:
            raise ParseError(f"missing section {key}", field=key)
    if "QDENSE" in data:
        if "LINEAR" not in data:
            raise ParseError("missing section LINEAR (required with QDENSE)", field="LINEAR")
        q = DenseQuad(data["QDENSE"].reshape(num_pairs(n), n, n))
        c = data["LINEAR"].reshape(n, n)
    else:
        for key in ("DIST", "FLOW"):
            if key not in data:
                raise ParseError(f"missing section {key}", field=key)
        chi, tau, delta = data.get("UNITS", (2.0, 0.75, 3.0))
        dist = data["DIST"].reshape(n, n)
        w = data["FLOW"].reshape(n, n)
        c, q = build_ap_costs(dist=dist, w=w, chi=chi, tau=tau, delta=delta)
        if "LINEAR" in data:
            c = data["LINEAR"].reshape(n, n)
    return Instance(f=data["SETUP"], b=data["CAPACITY"], d=data["DEMAND"], c=c, q=q, p=p,
                    capacitated=variant == "capacitated", name=name)


def load_instance(path) -> Instance:
    with open(path) as fh:
        text = fh.read()
    return loads(text, name=os.path.splitext(os.path.basename(str(path)))[0])


def read_ap(path, *, p=None, capacitated=False, chi=2.0, tau=0.75, delta=3.0,
            demand="outflow", scale_dist=1.0):
    """Read a raw hub file: ``n``, coordinates, flow matrix, optional ``setup capacity`` lines.

    Demands default to the originating flow ``O_i``. Without trailing
    setup/capacity data the setup costs are zero and capacities never bind.
    """
    with open(path) as fh:
        tokens = _Tokens(fh.read())
    tok, line = tokens.next()
    if tok is None:
        raise ParseError("empty file", line=1, field="n")
    try:
        n = int(float(tok))
    except ValueError:
        raise ParseError(f"expected node count, got {tok!r}", line=line, field="n") from None
    coords = _read_numbers(tokens, 2 * n, "coordinates").reshape(n, 2)
    w = _read_numbers(tokens, n * n, "flows").reshape(n, n)
    rest = len(tokens.items) - tokens.pos
    c, q = build_ap_costs(coords=coords * scale_dist, w=w, chi=chi, tau=tau, delta=delta)
    d = w.sum(axis=1) if demand == "outflow" else np.ones(n)
    if rest >= 2 * n:
        tokens.pos = len(tokens.items) - 2 * n
        tail = _read_numbers(tokens, 2 * n, "setup/capacity").reshape(n, 2)
        f, b = tail[:, 0], tail[:, 1]
    else:
        f, b = np.zeros(n), uncapacitated_capacities(d)
    if not capacitated:
        b = uncapacitated_capacities(d)
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return Instance(f=f, b=b, d=d, c=c, q=q, p=n if p is None else p,
                    capacitated=capacitated, name=name)
