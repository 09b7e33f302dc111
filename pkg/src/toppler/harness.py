"""Scaling sweeps, exponent fits and the aggregated invariant suite."""

from __future__ import annotations

import csv
import io
import math
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats

from .graphs import (Comb, DaryTree, GaltonWatson, Graph, Lamplighter, Lattice, ProductTree,
                     RegularTree, parse_graph)
from .mass import MassDist
from .strategies import (DEFAULT_BUDGET, RunResult, build_Utn, comb_strategy, greedy,
                         restricted_rw, rw_until_mass_out)

STRATEGIES = ("greedy", "roundrobin", "comb", "sandpile-smooth", "restricted")
CSV_HEADER = ["graph", "strategy", "n", "p", "seed", "moves", "wall_ms", "terminated"]


@dataclass
class ExperimentConfig:
    graph: str
    strategy: str
    ns: list
    p: float = 0.5
    tie: str = "lex"
    seeds: tuple = (0,)
    budget: int = DEFAULT_BUDGET
    outdir: str | None = None
    C: float = 2.0
    axes: str = "auto"
    timing: bool = False

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.ns, self.ns[1:])):
            raise ValueError("n-list must be strictly increasing")
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass
class ScalingReport:
    rows: list  # (n, moves, terminated)
    slope: float
    stderr: float
    residual_max: float
    axes: str
    intercept: float = 0.0
    flagged: list = field(default_factory=list)

    def text(self) -> str:
        lines = [f"axes: {self.axes}",
                 f"slope: {self.slope:.6f} +- {self.stderr:.6f}",
                 f"intercept: {self.intercept:.6f}",
                 f"residual_max: {self.residual_max:.6g}",
                 f"rows: {len(self.rows)} (flagged {len(self.flagged)})"]
        for n, m, ok in self.rows:
            lines.append(f"  n={n} moves={m}{'' if ok else ' FLAGGED'}")
        return "\n".join(lines) + "\n"


def default_axes(g: Graph) -> str:
    return "loglog" if isinstance(g, (Lattice, Comb)) else "loglinear"


def fit_exponent(rows, axes: str = "loglog") -> tuple:
    """Least-squares slope of log(y) against log(x) ("loglog") or x ("loglinear").

    Returns (slope, stderr, intercept, max abs residual).
    """
    rows = list(rows)
    if len(rows) < 3:
        raise ValueError("need at least 3 rows")
    x = np.array([r[0] for r in rows], dtype=float)
    y = np.array([r[1] for r in rows], dtype=float)
    if (y <= 0).any() or (axes == "loglog" and (x <= 0).any()):
        raise ValueError("values must be positive")
    if np.unique(x).size < 2:
        raise ValueError("degenerate abscissae")
    X = np.log(x) if axes == "loglog" else x
    if axes not in ("loglog", "loglinear"):
        raise ValueError(f"unknown axes {axes!r}")
    Y = np.log(y)
    fit = stats.linregress(X, Y)
    resid = Y - (fit.intercept + fit.slope * X)
    return float(fit.slope), float(fit.stderr), float(fit.intercept), float(np.abs(resid).max())


def run_strategy(g: Graph, strategy: str, n: int, p: float = 0.5, tie: str = "lex",
                 budget: int = DEFAULT_BUDGET, seed: int = 0, C: float = 2.0,
                 eps: float = 0.5, samples: int = 10_000) -> RunResult:
    """One run of a named strategy on B_n."""
    if strategy == "greedy":
        return greedy(g, n, p, tie=tie, budget=budget)
    if strategy == "roundrobin":
        return rw_until_mass_out(g, g.ball(n), p)
    if strategy == "comb":
        if not isinstance(g, Comb):
            raise ValueError("the comb strategy runs on the comb")
        return comb_strategy(n, p, C, budget=budget)
    if strategy == "sandpile-smooth":
        from .sandpile import smooth_to_uniform
        if not isinstance(g, Lattice):
            raise ValueError("sandpile smoothing runs on Z^d")
        mu = smooth_to_uniform(g.d, n, 0.5)
        mu.register_radius(n)
        return RunResult(mu.moves, mu, mu.mass_outside() >= p - 1e-12)
    if strategy == "restricted":
        if not isinstance(g, ProductTree):
            raise ValueError("the restricted strategy needs a product of trees")
        from .diagnostics import closed_forms
        ell = closed_forms(g.d, g.k)["ell"]
        rounds = math.ceil((1 + eps) * n / ell)
        U, info = build_Utn(g, n, eps, rounds, samples, seed)
        res = restricted_rw(g, U, rounds)
        out = res.dist.mass_outside(n)
        res.terminated = out >= p - 1e-12
        res.info.update(info, support=len(U), outside=out)
        return res
    raise ValueError(f"unknown strategy {strategy!r}")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TOPPLER_THREADS", "1")))
    except ValueError:
        return 1


def scan(config: ExperimentConfig) -> ScalingReport:
    """Run the strategy for every n (and seed), fit, and persist CSV + report."""
    g = parse_graph(config.graph)
    jobs = [(n, s) for n in config.ns for s in config.seeds]

    def one(job):
        n, s = job
        t0 = time.perf_counter()
        res = run_strategy(g, config.strategy, n, config.p, config.tie, config.budget, s, config.C)
        ms = (time.perf_counter() - t0) * 1000 if config.timing else 0
        return (n, s, res.moves, ms, res.terminated)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        out = sorted(pool.map(one, jobs), key=lambda r: (r[0], r[1]))
    rows = [(n, m, ok) for n, s, m, ms, ok in out]
    good = [(n, m) for n, m, ok in rows if ok]
    flagged = [n for n, m, ok in rows if not ok]
    axes = default_axes(g) if config.axes == "auto" else config.axes
    if len(good) >= 3:
        slope, se, icept, res = fit_exponent(good, axes)
    else:
        slope = se = icept = res = float("nan")
    report = ScalingReport(rows, slope, se, res, axes, icept, flagged)
    if config.outdir is not None:
        d = Path(config.outdir)
        d.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for n, s, m, ms, ok in out:
            w.writerow([g.spec, config.strategy, n, config.p, s, m,
                        f"{ms:.3f}" if config.timing else 0, int(ok)])
        (d / "scan.csv").write_text(buf.getvalue())
        (d / "report.txt").write_text(report.text())
    return report


# ---------------------------------------------------------------------------
# invariant suite


def _random_trace(g: Graph, steps: int, rng: random.Random, exact: bool, radius: int | None = None):
    """Random full topples (optionally restricted to B_radius) with the trace recorded."""
    mu = MassDist.delta(g, exact=exact, record=True)
    for _ in range(steps):
        cand = [v for v in mu.masses if radius is None or g.distance(v) < radius]
        if not cand:
            break
        v = sorted(cand)[rng.randrange(len(cand))]
        mu.full_topple(v)
    return mu


def _check(name, fn, results):
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing check is a failing check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    results.append({"name": name, "ok": bool(ok), "detail": detail,
                    "seconds": round(time.perf_counter() - t0, 3)})


def invariant_suite(scope: str = "fast") -> list:
    """Run the cross-module invariant checks; returns one dict per check."""
    if scope not in ("fast", "oracle", "full"):
        raise ValueError(f"unknown scope {scope!r}")
    from .diagnostics import (check_energy_m2, closed_forms, energy, exact_exit_time,
                              harmonic_residual, potential_kernel, second_moment)
    from .oracle import killed_walk_law, min_moves_exact
    from .strategies import round_robin_killed_rw
    results: list = []

    def conservation():
        rng = random.Random(1)
        worst = Fraction(0)
        for g in (Lattice(1), Lattice(2), Comb(), DaryTree(2), Lamplighter()):
            mu = MassDist.delta(g, exact=True)
            for _ in range(60):
                v = sorted(mu.masses)[rng.randrange(len(mu.masses))]
                m = mu[v] * Fraction(rng.randint(1, 4), 4)
                mu.topple(v, m)
                worst = max(worst, abs(mu.total() - 1))
        fl = MassDist.delta(Lattice(2))
        for _ in range(2000):
            fl.full_topple(max(fl.masses, key=lambda v: (fl[v], v)))
        drift = abs(fl.total() - 1)
        return worst == 0 and drift < 1e-9, f"exact drift {worst}, float drift {drift:.2e}"

    def m2_increment():
        rng = random.Random(2)
        worst = 0.0
        for d in (1, 2, 3):
            mu = MassDist.delta(Lattice(d), exact=True)
            prev = second_moment(mu)
            for _ in range(100):
                v = sorted(mu.masses)[rng.randrange(len(mu.masses))]
                m = mu[v]
                mu.topple(v, m)
                cur = second_moment(mu)
                if cur - prev != m:
                    return False, f"increment mismatch in d={d}"
                prev = cur
        return True, "exact on 300 steps"

    def commutation():
        g = Lattice(2)
        base = MassDist(g, {(0, 0): Fraction(1, 2), (1, 0): Fraction(1, 2)}, exact=True)
        a = base.copy()
        a.topple((0, 0), Fraction(1, 3))
        a.topple((1, 0), Fraction(1, 5))
        b = base.copy()
        b.topple((1, 0), Fraction(1, 5))
        b.topple((0, 0), Fraction(1, 3))
        return a.masses == b.masses, "adjacent pair"

    def killed_walk():
        worst = 0.0
        for g, n, r in ((Lattice(1), 8, 16), (Lattice(2), 5, 16), (DaryTree(2), 4, 16)):
            region = g.ball(n)
            res = round_robin_killed_rw(g, region, r)
            law = killed_walk_law(g, region, r)
            keys = set(law) | set(res.dist.masses)
            worst = max(worst, max(abs(law.get(k, 0) - res.dist[k]) for k in keys))
        return worst <= 1e-12, f"max error {worst:.2e}"

    def greedy_bound():
        bad = []
        for d, ns in ((1, (2, 4, 8, 16)), (2, (2, 4, 8)), (3, (2, 3, 4))):
            for n in ns:
                res = greedy(Lattice(d), n, 0.5)
                bound = 2 ** d / (0.5 * math.factorial(d)) * n ** (d + 2)
                if not (res.terminated and res.moves < bound):
                    bad.append((d, n, res.moves, bound))
        return not bad, f"violations {bad}"

    def kernel_checks():
        K = potential_kernel(2, 24)
        r = harmonic_residual(K)
        ok = r <= 10 * K.tol and abs(K((1, 0)) - 1) < 1e-9 and abs(K((1, 1)) - 4 / math.pi) < 1e-9
        return ok, f"harmonic residual {r:.2e}, tol {K.tol:.2e}"

    def closed_form_identity():
        for d in range(1, 7):
            for k in range(1, d + 1):
                if d + k >= 3:
                    closed_forms(d, k)
        return True, "exp(h/l) = theta for 1 <= k <= d <= 6"

    def energy_inequality():
        rng = random.Random(3)
        for _ in range(50):
            mu = _random_trace(Lattice(1), 30, rng, exact=True)
            rep = check_energy_m2(MassDist.delta(Lattice(1), exact=True), mu, 30)
            if not rep.ok:
                return False, f"violation {rep}"
        return True, "50 exact traces on Z"

    def exit_time():
        v = exact_exit_time(Lattice(1), Lattice(1).ball(4))
        return abs(v - 16) < 1e-9, f"E[T] = {v}"

    def oracle_vs_greedy():
        bad = []
        for g, n, ps in ((Lattice(1), 1, (0.25, 0.5, 1)), (Lattice(1), 2, (0.25, 0.5, 0.75, 0.9)),
                         (Lattice(2), 2, (0.25, 0.5)), (DaryTree(2), 2, (0.5, 0.9)),
                         (DaryTree(2), 3, (0.5,)), (Comb(), 2, (0.5,))):
            prev = 0
            for p in ps:
                o = min_moves_exact(g, n, p)
                gr = greedy(g, n, p, exact=True).moves
                if o is None or gr < o or o < prev:
                    bad.append((g.spec, n, p, o, gr))
                prev = o if o is not None else prev
        return not bad, f"bad {bad}"

    def sandpile_abelian():
        from .sandpile import compare_fields, sandpile_stabilize
        a = sandpile_stabilize(2, 500, 1e-12, order="distance-lex")
        b = sandpile_stabilize(2, 500, 1e-12, order="parallel")
        diff = compare_fields(a, b)
        return diff <= 1e-10, f"field difference {diff:.2e}"

    if scope in ("fast", "full"):
        _check("conservation", conservation, results)
        _check("second-moment-increment", m2_increment, results)
        _check("commutation", commutation, results)
        _check("killed-walk-law", killed_walk, results)
        _check("greedy-bound", greedy_bound, results)
        _check("kernel", kernel_checks, results)
        _check("closed-forms", closed_form_identity, results)
        _check("energy-inequality-z1", energy_inequality, results)
        _check("exit-time", exit_time, results)
    if scope in ("oracle", "full"):
        _check("oracle-vs-greedy", oracle_vs_greedy, results)
    if scope == "full":
        _check("sandpile-abelian", sandpile_abelian, results)
    return results
