"""Command line front end.

    aggclust validate inst.json
    aggclust solve inst.json --algo fpt --eps 0.5
    aggclust gen random --n 10 --T 2 --k 2 --seed 1 -o inst.json
    aggclust compare inst.json --algos brute,median-t2
    aggclust lp inst.json

Exit codes: 0 ok, 1 domain error (bad instance, violated precondition),
2 I/O or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
import time

import numpy as np

from .core import INF, MAX, SUM, InstanceError, aggregate_cost, lp_norm, validate_instance
from .io import InstanceFormatError, dumps_instance, load_instance

ALGOS = ("brute", "supplier-t2", "median-t2", "fpt", "fpt-supplier", "epas", "treewidth")
RANDOMIZED = ("epas",)
DEFAULT_EPS = {"epas": 0.2, "treewidth": 0.25}


class UsageError(Exception):
    pass


def _enc(v):
    v = float(v)
    if math.isinf(v):
        return "inf"
    return int(v) if v.is_integer() else v


def _parse_z(s):
    return INF if s.lower() in ("inf", "infinity") else float(s)


def _parse_agg(s):
    s = s.lower()
    if s == "sum":
        return SUM
    if s == "max":
        return MAX
    if s.startswith("l") and s[1:]:
        return lp_norm(float(s[1:]))
    raise argparse.ArgumentTypeError(f"unknown aggregator {s!r} (sum, max, l<q>)")


def run_algo(inst, algo, args):
    """Run one solver; returns (S, CostReport, extra flags)."""
    extra = {}
    eps = args.eps if args.eps is not None else DEFAULT_EPS.get(algo, 0.5)
    if algo in ("fpt", "fpt-supplier", "epas", "treewidth") or args.eps is not None:
        extra["eps"] = eps
    if algo == "brute":
        from .oracle import brute_force_opt
        S, rep = brute_force_opt(inst)
    elif algo == "supplier-t2":
        from .supplier import solve_supplier_t2
        S, rep = solve_supplier_t2(inst, eps=args.eps,
                                   search=args.search)
    elif algo == "median-t2":
        from .median import MedianTrace, solve_median_t2
        tr = MedianTrace()
        S, rep = solve_median_t2(inst, check=args.check, exact_lp=args.exact_lp, trace=tr)
        extra["lp_value"] = tr.lp_value
    elif algo == "fpt":
        from .fpt import solve_fpt_kt
        S, rep = solve_fpt_kt(inst, eps, coreset=args.coreset, radii=args.radii,
                              max_guesses=args.max_guesses, seed=args.seed or 0)
    elif algo == "fpt-supplier":
        from .fpt import solve_supplier_fpt_simple
        S, rep = solve_supplier_fpt_simple(inst, eps, max_guesses=args.max_guesses)
    elif algo == "epas":
        from .epas import Budgets, solve_epas
        b = Budgets(restarts=args.restarts, bucket_cap=args.bucket_cap, iter_cap=args.iter_cap)
        S, rep, info = solve_epas(inst, eps, seed=args.seed or 0, budgets=b)
        extra.update(certified=info.certified, restarts_used=info.restarts)
    elif algo == "treewidth":
        from .treewidth import AUTO, TreeDecomposition, solve_treewidth_dp
        td = AUTO
        if args.td and args.td != "auto":
            with open(args.td) as fh:
                td = TreeDecomposition.from_dict(json.load(fh))
        S, rep = solve_treewidth_dp(inst, td, args.mode, eps)
    else:
        raise UsageError(f"unknown algo {algo!r}")
    return S, rep, extra


def _result(inst, S, rep, wall, flags, ci):
    # re-evaluate so the emitted cost always matches the emitted solution
    check = aggregate_cost(inst, S)
    return {
        "solution": inst.labels(S),
        "per_scenario": [_enc(v) for v in check.per_scenario],
        "aggregate": _enc(check.aggregate),
        "wall_time": None if ci else round(wall, 6),
        "flags": flags,
    }


def _flags(args, algo):
    keys = {"supplier-t2": ["search"], "median-t2": ["check", "exact_lp"],
            "fpt": ["coreset", "radii", "max_guesses"], "fpt-supplier": ["max_guesses"],
            "epas": ["seed", "restarts", "bucket_cap", "iter_cap"],
            "treewidth": ["td", "mode"], "brute": []}[algo]
    return {"algo": algo, **{k: getattr(args, k) for k in keys}}


def cmd_validate(args):
    inst = load_instance(args.path)
    errs = validate_instance(inst)
    if errs:
        for e in errs:
            print(f"violation: {e}")
        return 1
    print(f"ok: {inst.name or args.path} n={inst.n} T={inst.T} k={inst.k} z={_enc(inst.z)} "
          f"aggregator={inst.aggregator}")
    return 0


def _load_checked(path):
    inst = load_instance(path)
    errs = validate_instance(inst)
    if errs:
        raise InstanceError("; ".join(errs))
    return inst


def cmd_solve(args):
    if args.ci and args.algo in RANDOMIZED and args.seed is None:
        raise UsageError(f"--seed is required for {args.algo} in --ci mode")
    inst = _load_checked(args.path)
    t0 = time.perf_counter()
    S, rep, extra = run_algo(inst, args.algo, args)
    wall = time.perf_counter() - t0
    out = _result(inst, S, rep, wall, {**_flags(args, args.algo), **extra}, args.ci)
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_compare(args):
    from .oracle import DEFAULT_CAP, brute_force_opt

    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    for a in algos:
        if a not in ALGOS:
            raise UsageError(f"unknown algo {a!r}; choose from {', '.join(ALGOS)}")
    inst = _load_checked(args.path)
    opt = None
    if math.comb(len(inst.facilities), min(inst.k, len(inst.facilities))) <= DEFAULT_CAP:
        opt = brute_force_opt(inst)[1].aggregate
    rows = []
    for a in algos:
        t0 = time.perf_counter()
        try:
            S, rep, _ = run_algo(inst, a, args)
            agg = aggregate_cost(inst, S).aggregate
            row = {"algo": a, "solution": " ".join(inst.labels(S)), "aggregate": _enc(agg)}
            if opt is not None:
                row["ratio"] = (1.0 if agg == opt else (INF if opt == 0 else agg / opt))
                row["ratio"] = _enc(round(row["ratio"], 6)) if not math.isinf(row["ratio"]) else "inf"
        except (InstanceError, ValueError, RuntimeError) as e:
            row = {"algo": a, "error": str(e)}
        row["wall_time"] = None if args.ci else round(time.perf_counter() - t0, 6)
        rows.append(row)
    cols = ["algo", "solution", "aggregate"] + (["ratio"] if opt is not None else []) + \
        ["wall_time", "error"]
    cols = [c for c in cols if any(c in r for r in rows)]
    if args.format == "json":
        print(json.dumps({"optimum": None if opt is None else _enc(opt), "rows": rows},
                         sort_keys=True))
    elif args.format == "csv":
        buf = _io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in cols})
        sys.stdout.write(buf.getvalue())
    else:
        table = [cols] + [["" if r.get(c) is None else str(r[c]) for c in cols] for r in rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
        for row in table:
            print("  ".join(x.ljust(wd) for x, wd in zip(row, widths)).rstrip())
    return 0


def cmd_lp(args):
    from .median import solve_lp

    inst = _load_checked(args.path)
    frac = solve_lp(inst, exact=args.exact, split=False)
    y = [str(v) if args.exact else _enc(round(float(v), 12)) for v in frac.y]
    fac = list(inst.facilities)
    print(json.dumps({"value": str(frac.value) if args.exact else _enc(frac.value),
                      "y": {inst.points[fac[i]]: y[i] for i in range(len(fac))}}, sort_keys=True))
    return 0


def cmd_gen(args):
    from . import generators as G
    from .oracle import Hypergraph3D

    rng = np.random.default_rng(args.seed)
    if args.kind == "3dm":
        if args.plant is None:
            h = G.random_hypergraph(args.k, args.edges, rng)
        else:
            h = G.random_hypergraph(args.k, args.edges, rng, plant=args.plant == "yes")
        if args.covered and not h.covered():
            h = G.random_covered_hypergraph(args.k, args.edges, rng)
        inst = G.gen_from_3dm(Hypergraph3D(h.k, h.edges))
    elif args.kind == "hitting-set":
        inst = G.gen_from_hitting_set(G.random_hitting_set(args.universe, args.sets, args.k, rng))
    else:
        inst = G.gen_random(args.n, args.T, args.k, args.seed, args.shape, z=args.z,
                            aggregator=args.aggregator, weighted=args.weighted, split=args.split)
    text = dumps_instance(inst)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return 0


def _solver_flags(p):
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--search", choices=["exhaustive", "pareto"], default="exhaustive",
                   help="supplier-t2 guess-pair search")
    p.add_argument("--check", action="store_true", help="median-t2: assert intermediate bounds")
    p.add_argument("--exact-lp", action="store_true", help="median-t2: rational simplex")
    p.add_argument("--coreset", choices=["identity", "sampled"], default="identity")
    p.add_argument("--radii", choices=["bucketed", "exact"], default="bucketed")
    p.add_argument("--max-guesses", type=int, default=2_000_000)
    p.add_argument("--restarts", type=int, default=1000)
    p.add_argument("--bucket-cap", type=int, default=64)
    p.add_argument("--iter-cap", type=int, default=None)
    p.add_argument("--td", default="auto", help="tree decomposition JSON file or 'auto'")
    p.add_argument("--mode", choices=["exact", "approx"], default="exact")
    p.add_argument("--ci", action="store_true",
                   help="reproducible output: wall times are null, randomized algos need --seed")


def build_parser():
    ap = argparse.ArgumentParser(prog="aggclust", description="Aggregate clustering toolkit")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="run one solver")
    p.add_argument("path")
    p.add_argument("--algo", choices=ALGOS, required=True)
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run several solvers and tabulate")
    p.add_argument("path")
    p.add_argument("--algos", default="brute,fpt")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    _solver_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("lp", help="LP relaxation value (two scenarios, z=1, sum)")
    p.add_argument("path")
    p.add_argument("--exact", action="store_true", help="rational arithmetic")
    p.set_defaults(func=cmd_lp)

    p = sub.add_parser("gen", help="generate an instance")
    gsub = p.add_subparsers(dest="kind", required=True)
    g = gsub.add_parser("3dm")
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--edges", type=int, default=8)
    g.add_argument("--plant", choices=["yes", "no"], default=None)
    g.add_argument("--covered", action="store_true")
    g = gsub.add_parser("hitting-set")
    g.add_argument("--universe", type=int, default=6)
    g.add_argument("--sets", type=int, default=4)
    g.add_argument("--k", type=int, default=2)
    g = gsub.add_parser("random")
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--T", type=int, default=2)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--shape", default="tree",
                   choices=["euclidean", "line", "tree", "random_graph", "two_tree"])
    g.add_argument("--z", type=_parse_z, default=1.0)
    g.add_argument("--aggregator", type=_parse_agg, default=SUM)
    g.add_argument("--weighted", action="store_true")
    g.add_argument("--split", action="store_true")
    for g in gsub.choices.values():
        g.add_argument("--seed", type=int, default=0)
        g.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        ap.error(str(e))
    except (InstanceFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (InstanceError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
