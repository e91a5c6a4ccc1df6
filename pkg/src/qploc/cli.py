"""Command line front end: ``qploc solve | gen | rlt-bound | selftest``.

Every flag can also be set through an environment variable named
``QPLOC_<FLAG>`` (upper case, dashes as underscores), e.g.
``QPLOC_TIME_LIMIT=60``. Flags given on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time

import numpy as np

from .bnc import SolveParams, solve
from .errors import QplocError
from .fileio import dumps, load_instance, read_ap
from .generators import generate_set1, random_instance
from .instance import VARIANTS, apply_variant, evaluate
from .rlt import CONFIGS, lp_bound, percent_gap

TABLE_COLUMNS = ["Instance", "Opt.", "time(s)", "%Dev heur", "%fixed plants", "%time root", "BB nodes"]
RLT_ORDER = ["STD", "RL2", "RL3", "RL4", "RL5", "RL6", "RL7", "RL8", "RL1"]


def _env_default(dest, default, cast):
    raw = os.environ.get("QPLOC_" + dest.upper())
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise SystemExit(f"qploc: invalid value {raw!r} in QPLOC_{dest.upper()}") from None


def _add_solver_flags(sub):
    d = SolveParams()
    flags = [
        ("--p", "p", None, int, "cardinality bound (p-median variants)"),
        ("--time-limit", "time_limit", math.inf, float, "seconds"),
        ("--node-limit", "node_limit", d.node_limit, int, "branch-and-cut nodes"),
        ("--eps-cut", "eps_cut", d.eps_cut, float, "minimum cut violation at fractional points"),
        ("--kappa", "kappa", d.kappa, float, "root stall threshold in percent"),
        ("--gamma", "gamma", d.gamma, int, "user cuts at depths that are multiples of gamma"),
        ("--upsilon", "upsilon", d.upsilon, int, "user cuts per node"),
        ("--phi", "phi", d.phi, float, "stabilization weight in (0, 1)"),
        ("--threads", "threads", 1, int, "separation workers"),
        ("--seed", "seed", 0, int, "random seed"),
    ]
    for flag, dest, default, cast, help_ in flags:
        sub.add_argument(flag, dest=dest, type=cast, default=_env_default(dest, default, cast), help=help_)
    sub.add_argument("--csv", default=_env_default("csv", None, str), help="append a result row to this CSV file")


def _read(path, fmt, variant, p):
    if fmt == "auto":
        with open(path) as fh:
            head = ""
            for line in fh:
                if line.strip() and not line.lstrip().startswith("#"):
                    head = line.split()
                    break
        fmt = "native" if len(head) == 3 and head[2] in ("capacitated", "uncapacitated") else "ap"
    if fmt == "native":
        inst = load_instance(path)
    else:
        inst = read_ap(path, capacitated=VARIANTS[variant][1])
    return apply_variant(inst, variant, p)


def _write_csv(path, header, rows):
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(header)
        writer.writerows(rows)


def _print_table(header, rows, out=None):
    out = out or sys.stdout
    cells = [header] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(str(r[c])) for r in cells) for c in range(len(header))]
    for r in cells:
        out.write("  ".join(str(v).rjust(w) for v, w in zip(r, widths)) + "\n")


def _cell(v):
    if isinstance(v, float):
        return f"{v:,.2f}"
    return str(v)


def cmd_solve(args):
    inst = _read(args.path, args.format, args.variant, args.p)
    params = SolveParams(phi=args.phi, eps_cut=args.eps_cut, kappa=args.kappa, gamma=args.gamma,
                         upsilon=args.upsilon, node_limit=args.node_limit, time_limit=args.time_limit,
                         workers=args.threads, seed=args.seed)
    np.random.seed(args.seed)
    sol, status, stats = solve(inst, params)
    value = evaluate(inst, sol).total
    row = [inst.name or os.path.basename(args.path), value, stats["time(s)"], stats["%Dev heur"],
           stats["%fixed plants"], stats["%time root"], stats["BB nodes"]]
    _print_table(TABLE_COLUMNS, [row])
    print(f"status: {status}   variant: {args.variant}   p: {inst.p}   gap(%): {stats['gap(%)']:.6f}")
    print("open: " + " ".join(str(k) for k in sol.open))
    print("assign: " + " ".join(str(k) for k in sol.assign))
    if args.csv:
        _write_csv(args.csv, TABLE_COLUMNS + ["status", "variant", "p"],
                   [[row[0], f"{value:.6f}"] + [f"{v:.4f}" for v in row[2:6]] + [row[6], status,
                                                                                  args.variant, inst.p]])
    return 0 if status == "optimal" else 3


def cmd_gen(args):
    if args.kind == "set1":
        inst, _ = generate_set1(args.n, args.seed, setup=args.setup, capacity=args.capacity,
                                capacitated=not args.uncapacitated, p=args.p)
    else:
        inst = random_instance(args.n, args.seed, capacitated=not args.uncapacitated, p=args.p)
    text = dumps(inst)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)
    return 0


def cmd_rlt_bound(args):
    if args.path:
        inst = _read(args.path, args.format, args.variant, args.p)
    else:
        inst = apply_variant(random_instance(args.n, args.seed, capacitated=args.variant.startswith("c"),
                                             p=args.p), args.variant, args.p)
    configs = args.configs.split(",") if args.configs else RLT_ORDER
    unknown = [c for c in configs if c not in CONFIGS]
    if unknown:
        raise SystemExit(f"qploc: unknown RLT configurations {unknown}")
    optimum = None
    if not args.no_opt:
        sol, _, _ = solve(inst, SolveParams(eps_cut=args.eps_cut))
        optimum = evaluate(inst, sol).total
    rows = []
    for cfg in configs:
        start = time.perf_counter()
        bound = lp_bound(inst, cfg)
        elapsed = time.perf_counter() - start
        gap = percent_gap(optimum, bound) if optimum is not None else float("nan")
        rows.append([cfg, f"{bound:.6f}", f"{round(gap, 4) + 0.0:.4f}", f"{elapsed:.3f}"])
    writer = csv.writer(sys.stdout)
    writer.writerow(["config", "bound", "gap(%)", "time(s)"])
    writer.writerows(rows)
    if args.csv:
        _write_csv(args.csv, ["instance", "config", "bound", "gap(%)", "time(s)"],
                   [[inst.name] + r for r in rows])
    return 0


def cmd_selftest(args):
    """Branch-and-cut against the enumeration oracle on small random instances."""
    from .errors import InfeasibleInstance
    from .oracle import enumerate_optimal
    names = sorted(VARIANTS)
    failures = 0
    for t in range(args.count):
        n = 4 + t % 3
        variant = names[t % 4]
        p = 1 + t % 3
        inst = apply_variant(random_instance(n, args.seed + t, capacitated=variant.startswith("c"), p=p),
                             variant, p)
        try:
            _, expected, _ = enumerate_optimal(inst)
        except InfeasibleInstance:
            expected = None
        try:
            sol, _, _ = solve(inst, SolveParams())
            got = evaluate(inst, sol).total
        except InfeasibleInstance:
            got = None
        ok = (expected is None and got is None) or (
            expected is not None and got is not None and abs(got - expected) <= 1e-6 * max(1.0, abs(expected)))
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'} n={n} {variant} p={inst.p} oracle={expected} bnc={got}")
    print(f"{args.count - failures}/{args.count} oracle checks passed")
    return 0 if failures == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="qploc", description="Exact solver for quadratic p-location problems")
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("solve", help="solve an instance file")
    s.add_argument("path")
    s.add_argument("--variant", choices=sorted(VARIANTS), default=_env_default("variant", "cphmpsa", str))
    s.add_argument("--format", choices=["auto", "native", "ap"], default="auto")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_solve)

    g = subs.add_parser("gen", help="write a generated instance")
    g.add_argument("-n", type=int, required=True)
    g.add_argument("--seed", type=int, default=_env_default("seed", 0, int))
    g.add_argument("--kind", choices=["set1", "random"], default="set1")
    g.add_argument("--setup", choices=["L", "T"], default="L")
    g.add_argument("--capacity", choices=["L", "T"], default="L")
    g.add_argument("--p", type=int, default=None)
    g.add_argument("--uncapacitated", action="store_true")
    g.add_argument("-o", "--output", default=None)
    g.set_defaults(func=cmd_gen)

    r = subs.add_parser("rlt-bound", help="CSV of linearized relaxation bounds")
    r.add_argument("path", nargs="?")
    r.add_argument("-n", type=int, default=6, help="size of a random instance when no path is given")
    r.add_argument("--seed", type=int, default=_env_default("seed", 0, int))
    r.add_argument("--variant", choices=sorted(VARIANTS), default="cphmpsa")
    r.add_argument("--format", choices=["auto", "native", "ap"], default="auto")
    r.add_argument("--p", type=int, default=2)
    r.add_argument("--configs", default=None, help="comma separated, default all")
    r.add_argument("--no-opt", action="store_true", help="skip the exact solve (gaps become nan)")
    r.add_argument("--eps-cut", type=float, default=_env_default("eps_cut", SolveParams().eps_cut, float))
    r.add_argument("--csv", default=None)
    r.set_defaults(func=cmd_rlt_bound)

    t = subs.add_parser("selftest", help="compare the solver with brute force")
    t.add_argument("--count", type=int, default=12)
    t.add_argument("--seed", type=int, default=_env_default("seed", 0, int))
    t.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (QplocError, ValueError, OSError) as exc:
        print(f"qploc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
