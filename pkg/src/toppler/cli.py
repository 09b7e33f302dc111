"""Command line entry point: ``toppler run|scan|oracle|kernel|stats|render|check``."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .graphs import GraphError, Lamplighter, Lattice, parse_graph
from .harness import STRATEGIES, ExperimentConfig, invariant_suite, run_strategy, scan
from .strategies import DEFAULT_BUDGET, greedy

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


def _ints(text):
    return [int(t) for t in text.split(",") if t]


def cmd_run(args):
    g = parse_graph(args.graph)
    if args.sweeps is not None:
        res = greedy(g, None, tie=args.tie, max_sweeps=args.sweeps, budget=args.budget)
    else:
        res = run_strategy(g, args.strategy, args.n, args.p, args.tie, args.budget, args.seed, args.C)
    print(f"graph={g.spec} strategy={args.strategy} n={args.n} p={args.p} moves={res.moves} "
          f"rounds={res.rounds} terminated={int(res.terminated)}")
    for k, v in sorted(res.info.items()):
        print(f"  {k}={v}")
    if args.dump:
        with open(args.dump, "w") as fh:
            res.dist.dump_csv(fh)
    if res.budget_exhausted:
        return EXIT_BUDGET
    return EXIT_OK


def cmd_scan(args):
    cfg = ExperimentConfig(args.graph, args.strategy, _ints(args.ns), args.p, args.tie,
                           tuple(_ints(args.seeds)), args.budget, args.out, args.C, args.axes,
                           args.timing)
    rep = scan(cfg)
    sys.stdout.write(rep.text())
    return EXIT_BUDGET if rep.flagged else EXIT_OK


def cmd_oracle(args):
    from .oracle import min_moves_exact
    g = parse_graph(args.graph)
    val = min_moves_exact(g, args.n, args.p, args.cap)
    print("none" if val is None else val)
    return EXIT_OK


def cmd_kernel(args):
    from .diagnostics import potential_kernel
    K = potential_kernel(args.d, args.L, args.tol)
    print(f"d={K.d} L={K.L} method={K.method} tol={K.tol:.3e} converged={int(K.converged)}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = [f"x{i + 1}" for i in range(K.d)] + ["a"] + (["g"] if K.g is not None else [])
            w.writerow(cols)
            for idx in np.ndindex(*K.a.shape):
                row = [i - K.L for i in idx] + [repr(float(K.a[idx]))]
                if K.g is not None:
                    row.append(repr(float(K.g[idx])))
                w.writerow(row)
    return EXIT_OK if K.converged else EXIT_INVARIANT


def cmd_stats(args):
    from .diagnostics import exact_exit_time, mc_exit_time, mc_green_decay, mc_speed
    g = parse_graph(args.graph)
    if args.kind == "speed":
        st = mc_speed(g, args.t, args.samples, args.seed, args.method)
    elif args.kind == "exit":
        region = g.ball(args.n)
        st = mc_exit_time(g, region, args.samples, args.seed)
        try:
            st.extra["exact"] = exact_exit_time(g, region)
        except ValueError:
            pass
    else:
        st = mc_green_decay(g, args.max_dist, args.samples, args.seed)
    print(f"kind={st.kind} estimate={st.estimate:.6f} stderr={st.stderr:.6f} samples={st.samples}")
    for k, v in sorted(st.extra.items()):
        print(f"  {k}={v}")
    return EXIT_OK


def cmd_render(args):
    from .mass import MassDist
    from .render import render_heatmap
    g = parse_graph(args.graph)
    if args.from_dump:
        mu = MassDist(g, {})
        with open(args.from_dump) as fh:
            for row in csv.DictReader(fh):
                mu.masses[g.decode(row["vertex_encoding"])] = float(row["mass"])
    else:
        mu = greedy(g, None, tie=args.tie, max_sweeps=args.sweeps).dist
    b = [int(t) for t in args.bounds.split(",")]
    if len(b) != 4:
        raise ValueError("bounds must be xmin,xmax,ymin,ymax")
    render_heatmap(mu, tuple(b), args.out, args.scale)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_check(args):
    res = invariant_suite(args.scope)
    ok = all(r["ok"] for r in res)
    if args.json:
        print(json.dumps({"scope": args.scope, "ok": ok, "checks": res}, indent=2))
    else:
        for r in res:
            print(f"{'PASS' if r['ok'] else 'FAIL'} {r['name']}: {r['detail']} ({r['seconds']}s)")
    return EXIT_OK if ok else EXIT_INVARIANT


def build_parser():
    ap = argparse.ArgumentParser(prog="toppler", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run one toppling strategy")
    p.add_argument("--graph", required=True)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--strategy", choices=STRATEGIES, default="greedy")
    p.add_argument("--tie", choices=("lex", "sym"), default="lex")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--C", type=float, default=2.0, help="comb rectangle width factor")
    p.add_argument("--sweeps", type=int, default=None,
                   help="unrestricted greedy for this many sweeps (ignores --n/--p)")
    p.add_argument("--dump", default=None, help="write the final distribution as CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scan", help="scaling sweep with exponent fit")
    p.add_argument("--graph", required=True)
    p.add_argument("--strategy", choices=STRATEGIES, default="greedy")
    p.add_argument("--ns", required=True, help="comma separated, increasing")
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--tie", choices=("lex", "sym"), default="lex")
    p.add_argument("--seeds", default="0")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--C", type=float, default=2.0)
    p.add_argument("--axes", choices=("auto", "loglog", "loglinear"), default="auto")
    p.add_argument("--timing", action="store_true", help="record wall_ms (breaks byte identity)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("oracle", help="exact minimum number of moves on a tiny instance")
    p.add_argument("--graph", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--cap", type=int, default=12)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("kernel", help="potential kernel / Green function table")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("stats", help="random walk statistics")
    p.add_argument("--graph", required=True)
    p.add_argument("--kind", choices=("speed", "exit", "green"), required=True)
    p.add_argument("--t", type=int, default=1000)
    p.add_argument("--n", type=int, default=4, help="ball radius for exit times")
    p.add_argument("--max-dist", type=int, default=10)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("endpoint", "extrapolated"), default="endpoint")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("render", help="PGM heatmap of a planar distribution")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bounds", required=True, help="xmin,xmax,ymin,ymax")
    p.add_argument("--scale", choices=("linear", "log"), default="linear")
    p.add_argument("--from-dump", default=None)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--tie", choices=("lex", "sym"), default="sym")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("check", help="invariant suite")
    p.add_argument("--scope", choices=("fast", "oracle", "full"), default="fast")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (GraphError, ValueError) as exc:
        print(f"toppler: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
