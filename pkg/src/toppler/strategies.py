"""Toppling strategies: greedy, round-robin killed walk, comb rectangle, restricted support."""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graphs import Comb, Graph, Lattice, ProductTree, RegularTree
from .mass import MassDist, ToppleRecord

DEFAULT_BUDGET = 10**8
FLOAT_SLACK = 1e-12
TIE_RTOL = 1e-9


class BudgetExhausted(RuntimeError):
    pass


@dataclass
class RunResult:
    moves: int
    dist: MassDist
    terminated: bool
    budget_exhausted: bool = False
    rounds: int = 0
    info: dict = field(default_factory=dict)

    @property
    def trace(self):
        return self.dist.trace


def _target_reached(outside, p, exact: bool) -> bool:
    if exact:
        return outside >= p
    return outside >= p - FLOAT_SLACK


def _as_p(p, exact: bool):
    return Fraction(str(p)) if exact and not isinstance(p, Fraction) else p


def greedy(g: Graph, n: int | None, p=0.5, tie: str = "lex", budget: int = DEFAULT_BUDGET,
           exact: bool = False, record: bool = False, dist: MassDist | None = None,
           max_sweeps: int | None = None) -> RunResult:
    """Fully topple the heaviest vertex of B_n until mass >= p sits outside B_n.

    ``tie="lex"`` breaks ties by the smallest vertex key. ``tie="sym"`` topples
    every vertex holding the current maximum (relative tolerance 1e-9) in one
    sweep, using the masses read at the start of the sweep; each vertex counts
    as one move. With ``n=None`` no vertex is excluded and the run stops only
    after ``max_sweeps`` sweeps (or the budget).
    """
    if tie not in ("lex", "sym"):
        raise ValueError(f"unknown tie rule {tie!r}")
    if n is None and max_sweeps is None:
        raise ValueError("unrestricted greedy needs max_sweeps")
    if n is not None and n < 1:
        raise ValueError("n must be >= 1")
    if n is not None and not 0 < float(p) < 1 + 1e-15:
        raise ValueError("p must lie in (0, 1]")
    mu = dist if dist is not None else MassDist.delta(g, exact=exact, record=record)
    exact = mu.exact
    p = _as_p(p, exact)
    masses = mu.masses
    trace = mu.trace
    distance = g.distance
    nbr_cache: dict = {}
    dist_cache: dict = {}

    def nbrs_of(v):
        t = nbr_cache.get(v)
        if t is None:
            t = g.neighbors(v)
            nbr_cache[v] = t
        return t

    def inside(v):
        r = dist_cache.get(v)
        if r is None:
            r = n is None or distance(v) < n
            dist_cache[v] = r
        return r

    if n is not None:
        mu.register_radius(n)
        outside = mu._outside
    else:
        outside = 0
    heap = [(-m, v) for v, m in masses.items() if m > 0 and inside(v)]
    heapq.heapify(heap)
    push, pop = heapq.heappush, heapq.heappop
    moves = 0
    sweeps = 0
    exhausted = False

    def done():
        return n is not None and _target_reached(outside, p, exact)

    while not done():
        if max_sweeps is not None and sweeps >= max_sweeps:
            break
        # pop the maximum valid entry (or all tied maxima)
        batch = []
        while heap:
            negm, v = pop(heap)
            cur = masses.get(v)
            if cur is not None and cur == -negm:
                batch.append((v, cur))
                break
        if not batch:
            break  # nothing left to topple inside B_n
        if tie == "sym":
            top = batch[0][1]
            floor = top - abs(top) * TIE_RTOL
            seen = {batch[0][0]}
            while heap and -heap[0][0] >= floor:
                negm, v = pop(heap)
                cur = masses.get(v)
                if cur is not None and cur == -negm and v not in seen:
                    seen.add(v)
                    batch.append((v, cur))
        sweeps += 1
        for v, m in batch:
            if moves >= budget:
                exhausted = True
                break
            nb = nbrs_of(v)
            share = m / len(nb)
            cur = masses[v]
            rest = cur - m
            if rest == 0:
                del masses[v]
            else:
                masses[v] = rest
                push(heap, (-rest, v))
            for u in nb:
                nm = masses.get(u, 0) + share
                masses[u] = nm
                if inside(u):
                    push(heap, (-nm, u))
                else:
                    outside += share
            moves += 1
            if trace is not None:
                trace.records.append(_record(mu.moves + moves, v, m, cur))
        if exhausted:
            break
    mu.moves += moves
    if n is not None:
        mu._outside = outside
    terminated = done()
    return RunResult(moves, mu, terminated, exhausted and not terminated, rounds=sweeps)


_record = ToppleRecord


# ---------------------------------------------------------------------------
# round robin / killed random walk


def round_robin_killed_rw(g: Graph, region, rounds: int, exact: bool = False,
                          dist: MassDist | None = None, record: bool = False,
                          p=None, budget: int = DEFAULT_BUDGET) -> RunResult:
    """Cycle through ``region`` in sorted order, toppling the round-start mass at each vertex.

    After r rounds the distribution is the law of the walk killed on leaving
    ``region``, observed at time r. With ``p`` set, stops at the first round
    boundary where the mass outside ``region`` is at least ``p``.
    """
    region = set(region)
    if g.origin not in region:
        raise ValueError("region must contain the origin")
    mu = dist if dist is not None else MassDist.delta(g, exact=exact, record=record)
    exact = mu.exact
    if p is not None:
        p = _as_p(p, exact)
    order = sorted(region)
    masses = mu.masses
    zero = Fraction(0) if exact else 0.0
    outside = sum((m for v, m in masses.items() if v not in region), zero)
    nb = {v: g.neighbors(v) for v in order}
    moves = 0
    done_rounds = 0
    exhausted = False
    for _ in range(rounds):
        if p is not None and _target_reached(outside, p, exact):
            break
        start = [(v, masses[v]) for v in order if masses.get(v, 0) > 0]
        if moves + len(start) > budget:
            exhausted = True
            break
        for v, m in start:
            cur = masses[v]
            nbrs = nb[v]
            share = m / len(nbrs)
            rest = cur - m
            if rest == 0:
                del masses[v]
            else:
                masses[v] = rest
            for u in nbrs:
                masses[u] = masses.get(u, 0) + share
                if u not in region:
                    outside += share
            moves += 1
            if mu.trace is not None:
                mu.trace.records.append(_record(mu.moves + moves, v, m, cur))
        done_rounds += 1
    mu.moves += moves
    terminated = p is not None and _target_reached(outside, p, exact)
    return RunResult(moves, mu, terminated, exhausted, rounds=done_rounds,
                     info={"outside_region": outside})


def rw_until_mass_out(g: Graph, region, p, round_cap: int = 10**6, exact: bool = False) -> RunResult:
    """Round-robin until the mass outside ``region`` reaches ``p``."""
    res = round_robin_killed_rw(g, region, round_cap, exact=exact, p=p)
    res.budget_exhausted = res.budget_exhausted or not res.terminated
    return res


def restricted_rw(g: Graph, support, rounds: int, exact: bool = False) -> RunResult:
    """Round-robin over ``support`` only; mass leaving it freezes."""
    return round_robin_killed_rw(g, support, rounds, exact=exact)


# ---------------------------------------------------------------------------
# dense round robin on Z^d and on the comb


class DenseLattice:
    """Round-robin killed walk on a box of Z^d, vectorized with numpy."""

    def __init__(self, d: int, half: int, mask: np.ndarray):
        self.d = d
        self.half = half
        self.mask = mask
        shape = (2 * half + 1,) * d
        self.field = np.zeros(shape)
        self.field[(half,) * d] = 1.0

    def step(self) -> int:
        f = self.field
        m = np.where(self.mask, f, 0.0)
        k = int(np.count_nonzero(m))
        f -= m
        share = m / (2 * self.d)
        for ax in range(self.d):
            lo = [slice(None)] * self.d
            hi = [slice(None)] * self.d
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            f[tuple(lo)] += share[tuple(hi)]
            f[tuple(hi)] += share[tuple(lo)]
        return k


def lattice_round_robin(d: int, n: int, rounds: int, p: float | None = None) -> tuple:
    """Dense killed walk on Z^d with region B_n; returns (moves, rounds, field, half)."""
    half = n
    grids = np.indices((2 * half + 1,) * d) - half
    l1 = np.abs(grids).sum(axis=0)
    mask = l1 < n
    st = DenseLattice(d, half, mask)
    moves = 0
    r = 0
    while r < rounds:
        if p is not None and st.field[~mask].sum() >= p - FLOAT_SLACK:
            break
        moves += st.step()
        r += 1
    return moves, r, st.field, half


class DenseComb:
    """Round-robin killed walk on a region of the comb, field indexed [x, y]."""

    def __init__(self, xhalf: int, yhalf: int, mask: np.ndarray):
        self.xh, self.yh = xhalf, yhalf
        self.mask = mask
        self.field = np.zeros((2 * xhalf + 1, 2 * yhalf + 1))
        self.field[xhalf, yhalf] = 1.0

    def step(self) -> int:
        f = self.field
        y0 = self.yh
        m = np.where(self.mask, f, 0.0)
        k = int(np.count_nonzero(m))
        f -= m
        tooth = m.copy()
        tooth[:, y0] = 0.0
        spine = m[:, y0]
        # teeth: degree 2, vertical only
        f[:, :-1] += tooth[:, 1:] / 2
        f[:, 1:] += tooth[:, :-1] / 2
        # spine: degree 4
        q = spine / 4
        f[:, y0 - 1] += q
        f[:, y0 + 1] += q
        f[:-1, y0] += q[1:]
        f[1:, y0] += q[:-1]
        return k


def comb_region_mask(n: int, C: float) -> tuple:
    w = int(math.floor(C * math.sqrt(n)))
    xh, yh = w + 1, n
    x = np.arange(-xh, xh + 1)[:, None]
    y = np.arange(-yh, yh + 1)[None, :]
    mask = (np.abs(x) <= w) & (np.abs(y) <= n) & (np.abs(x) + np.abs(y) < n)
    return w, xh, yh, mask


def comb_strategy(n: int, p=0.5, C: float = 2.0, round_cap: int = 10**6,
                  budget: int = DEFAULT_BUDGET) -> RunResult:
    """Killed walk on the rectangle [-C sqrt n, C sqrt n] x [-n, n] of the comb.

    Only vertices of the rectangle inside B_n are toppled. Mass reaching the
    spine ends (+-(w+1), 0) is frozen and never counts toward the target;
    the run is flagged when that mass exceeds 1 - p, since p is then
    unreachable.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    w, xh, yh, mask = comb_region_mask(n, C)
    st = DenseComb(xh, yh, mask)
    x = np.arange(-xh, xh + 1)[:, None]
    y = np.arange(-yh, yh + 1)[None, :]
    far = (np.abs(x) + np.abs(y)) >= n
    spine_ends = (np.abs(x) == w + 1) & (y == 0)
    moves = 0
    rounds = 0
    flagged = False
    while True:
        outside = float(st.field[far].sum())
        if outside >= p - FLOAT_SLACK:
            break
        spine_exit = float(st.field[spine_ends & ~far].sum())
        if spine_exit > 1 - p:
            flagged = True
            break
        if rounds >= round_cap or moves >= budget:
            break
        moves += st.step()
        rounds += 1
    outside = float(st.field[far].sum())
    spine_exit = float(st.field[spine_ends & ~far].sum())
    mu = MassDist(Comb(), {})
    mu.masses = {(int(i - xh), int(j - yh)): float(st.field[i, j])
                 for i, j in zip(*np.nonzero(st.field))}
    mu.moves = moves
    mu.register_radius(n)
    terminated = outside >= p - FLOAT_SLACK
    return RunResult(moves, mu, terminated, budget_exhausted=not terminated and not flagged,
                     rounds=rounds,
                     info={"spine_exit": spine_exit, "flagged": flagged, "width": w,
                           "region_size": int(mask.sum())})


def comb_region(n: int, C: float) -> set:
    w, xh, yh, mask = comb_region_mask(n, C)
    return {(int(i - xh), int(j - yh)) for i, j in zip(*np.nonzero(mask))}


# ---------------------------------------------------------------------------
# restricted support on trees and products


def ball_index(g: Graph, n: int, cap: int = 10**7) -> int:
    """r_n = max{r : |B_r| <= n}."""
    r = 0
    while g.volume(r + 1, cap) <= n:
        r += 1
    return r


def build_Utn(g: Graph, n: int, eps: float, t_star: int, mc_samples: int, seed: int = 0,
              h: float | None = None, rng_walker=None) -> tuple:
    """Typical-set support for the restricted round robin.

    Returns ``(U, info)``: ``U`` is B_{r_n} together with every x in B_n such
    that (1/t) log p_t(o, x) lies in (-h(1+eps), -h(1-eps)) for some
    r_n <= t <= t_star, with p_t estimated from ``mc_samples`` walks.
    """
    if h is None:
        if isinstance(g, ProductTree):
            from .diagnostics import closed_forms
            h = closed_forms(g.d, g.k)["h"]
        else:
            raise ValueError("entropy h must be supplied for this family")
    r_n = ball_index(g, n)
    U = set(g.ball(r_n))
    lo, hi = -h * (1 + eps), -h * (1 - eps)
    rng = random.Random(seed)
    counts = [dict() for _ in range(t_star + 1)]
    for _ in range(mc_samples):
        v = g.origin
        for t in range(1, t_star + 1):
            nb = g.neighbors(v)
            v = nb[rng.randrange(len(nb))]
            if t >= r_n:
                c = counts[t]
                c[v] = c.get(v, 0) + 1
    empty = 0
    for t in range(max(r_n, 1), t_star + 1):
        c = counts[t]
        if not c:
            empty += 1
            continue
        for v, k in c.items():
            if g.distance(v) >= n:
                continue
            val = math.log(k / mc_samples) / t
            if lo < val < hi:
                U.add(v)
    return U, {"r_n": r_n, "h": h, "empty_levels": empty, "flagged": empty > 0}
