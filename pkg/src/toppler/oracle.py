"""Exact ground truth on tiny instances.

``min_moves_exact`` finds the least number of toppling moves putting mass >= p
outside B_n by exhaustive breadth-first search over full topplings, in exact
rational arithmetic. Restricting to full topplings loses nothing: any partial
topple can be traded for a full one without increasing the count.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy import sparse

from .graphs import Graph
from .mass import MassDist

MAX_BALL = 12
MAX_DEPTH = 12
MAX_STATES = 3_000_000


class GuardError(ValueError):
    pass


def _canon(masses: dict) -> tuple:
    return tuple(sorted(masses.items()))


def min_moves_exact(g: Graph, n: int, p, depth_cap: int = MAX_DEPTH,
                    start: MassDist | dict | None = None,
                    max_states: int = MAX_STATES) -> int | None:
    """Exact N_p for the open ball B_n, or None if it exceeds ``depth_cap``."""
    ball = g.ball(n, cap=10 * MAX_BALL)
    if len(ball) > MAX_BALL:
        raise GuardError(f"|B_{n}| = {len(ball)} exceeds the oracle guard {MAX_BALL}")
    if depth_cap > MAX_DEPTH:
        raise GuardError(f"depth cap {depth_cap} exceeds the oracle guard {MAX_DEPTH}")
    p = Fraction(str(p)) if not isinstance(p, Fraction) else p
    inside = set(ball)
    if start is None:
        init = {g.origin: Fraction(1)}
    else:
        src = start.masses if isinstance(start, MassDist) else start
        init = {v: Fraction(m) for v, m in src.items() if m != 0}
    nbrs: dict = {}

    def outside_mass(state):
        return sum((m for v, m in state if v not in inside), Fraction(0))

    s0 = _canon(init)
    if outside_mass(s0) >= p:
        return 0
    frontier = [s0]
    seen = {s0}
    for depth in range(1, depth_cap + 1):
        nxt = []
        for state in frontier:
            base = dict(state)
            out0 = outside_mass(state)
            for v, m in state:
                if v not in inside:
                    continue
                nb = nbrs.get(v)
                if nb is None:
                    nb = nbrs[v] = g.neighbors(v)
                share = m / len(nb)
                new = dict(base)
                del new[v]
                gain = Fraction(0)
                for u in nb:
                    new[u] = new.get(u, Fraction(0)) + share
                    if u not in inside:
                        gain += share
                if out0 + gain >= p:
                    return depth
                key = _canon(new)
                if key not in seen:
                    seen.add(key)
                    nxt.append(key)
                    if len(seen) > max_states:
                        raise GuardError(f"state space exceeded {max_states} at depth {depth}")
        if not nxt:
            return None
        frontier = nxt
    return None


def killed_walk_law(g: Graph, region, rounds: int, start=None) -> dict:
    """Law of the simple random walk killed on leaving ``region`` after ``rounds`` steps.

    Computed by repeated sparse matrix-vector products on region plus its outer
    boundary, independently of the toppling engine.
    """
    region = sorted(set(region))
    verts = list(region)
    index = {v: i for i, v in enumerate(verts)}
    for v in region:
        for u in g.neighbors(v):
            if u not in index:
                index[u] = len(verts)
                verts.append(u)
    rows, cols, vals = [], [], []
    inreg = set(region)
    for v in verts:
        i = index[v]
        if v in inreg:
            nb = g.neighbors(v)
            for u in nb:
                rows.append(index[u])
                cols.append(i)
                vals.append(1.0 / len(nb))
        else:
            rows.append(i)
            cols.append(i)
            vals.append(1.0)
    P = sparse.csr_matrix((vals, (rows, cols)), shape=(len(verts), len(verts)))
    x = np.zeros(len(verts))
    if start is None:
        x[index[g.origin]] = 1.0
    else:
        for v, m in start.items():
            x[index[v]] = float(m)
    for _ in range(rounds):
        x = P @ x
    return {v: float(x[index[v]]) for v in verts if x[index[v]] != 0}
