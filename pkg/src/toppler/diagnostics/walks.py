"""Random walk statistics: speed, exit times, lamplighter Green function decay."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..graphs import DaryTree, Graph, Lamplighter, Lattice, ProductTree, RegularTree

EXIT_UNKNOWNS_CAP = 10_000


@dataclass
class RwStats:
    kind: str
    estimate: float
    stderr: float
    samples: int
    extra: dict = field(default_factory=dict)


def closed_forms(d: int, k: int) -> dict:
    """Speed, entropy and growth exponent of simple random walk on T_d x T_k."""
    if not (d >= k >= 1 and d + k >= 3):
        raise ValueError(f"need d >= k >= 1 and d + k >= 3, got d={d}, k={k}")
    s = d + k + 2
    ell = (d + k - 2) / s
    h = (d - 1) / s * math.log(d) + (k - 1) / s * math.log(k)
    theta = d ** ((d - 1) / (d + k - 2)) * k ** ((k - 1) / (d + k - 2))
    if abs(math.exp(h / ell) - theta) > 1e-12 * max(1.0, theta):
        raise AssertionError(f"exp(h/l) != theta for d={d}, k={k}")
    return {"ell": ell, "h": h, "theta": theta}


# ---------------------------------------------------------------------------
# speed


def _tree_levels(rng, n, steps, root_children, children, levels=None):
    """Vectorized level chain of a tree walk (root has ``root_children`` neighbours)."""
    lev = np.zeros(n, dtype=np.int64) if levels is None else levels
    for _ in range(steps):
        up = rng.random(n) < 1.0 / (children + 1)
        lev = np.where(lev == 0, 1, np.where(up, lev - 1, lev + 1))
    return lev


def _distance_paths(g: Graph, t: int, samples: int, seed: int, checkpoints) -> np.ndarray:
    """Distances d(o, X_s) at each checkpoint s, shape (samples, len(checkpoints))."""
    rng = np.random.default_rng(seed)
    cps = list(checkpoints)
    out = np.zeros((samples, len(cps)))
    if isinstance(g, ProductTree):
        a = np.zeros(samples, dtype=np.int64)
        b = np.zeros(samples, dtype=np.int64)
        pa = (g.d + 1) / (g.d + g.k + 2)
        prev = 0
        for j, s in enumerate(cps):
            for _ in range(s - prev):
                left = rng.random(samples) < pa
                u = rng.random(samples)
                na = np.where(a == 0, 1, np.where(u < 1 / (g.d + 1), a - 1, a + 1))
                nb = np.where(b == 0, 1, np.where(u < 1 / (g.k + 1), b - 1, b + 1))
                a = np.where(left, na, a)
                b = np.where(left, b, nb)
            prev = s
            out[:, j] = a + b
        return out
    if isinstance(g, (RegularTree, DaryTree)):
        lev = np.zeros(samples, dtype=np.int64)
        prev = 0
        for j, s in enumerate(cps):
            lev = _tree_levels(rng, samples, s - prev, g.root_children, g.children, lev)
            prev = s
            out[:, j] = lev
        return out
    if isinstance(g, Lattice):
        pos = np.zeros((samples, g.d), dtype=np.int64)
        prev = 0
        for j, s in enumerate(cps):
            for _ in range(s - prev):
                ax = rng.integers(0, g.d, samples)
                sg = rng.integers(0, 2, samples) * 2 - 1
                pos[np.arange(samples), ax] += sg
            prev = s
            out[:, j] = np.abs(pos).sum(axis=1)
        return out
    # generic walker
    py = random.Random(seed)
    for i in range(samples):
        v = g.origin
        prev = 0
        for j, s in enumerate(cps):
            for _ in range(s - prev):
                nb = g.neighbors(v)
                v = nb[py.randrange(len(nb))]
            prev = s
            out[i, j] = g.distance(v)
    return out


def mc_speed(g: Graph, t: int, samples: int, seed: int = 0, method: str = "endpoint") -> RwStats:
    """Estimate the speed lim d(o, X_t)/t.

    ``endpoint`` averages d(o, X_t)/t. ``extrapolated`` fits
    E d(o, X_s) = l s + b sqrt(s) + c over checkpoints s in [t/8, t] and
    reports l; this removes the sqrt(s) bias of recurrent factors (such as the
    Z factor of T_d x T_1). Either way each sample contributes one number, so
    the standard error comes from independent samples.
    """
    if t < 1 or samples < 2:
        raise ValueError("need t >= 1 and at least 2 samples")
    if method == "endpoint":
        D = _distance_paths(g, t, samples, seed, [t])
        y = D[:, 0] / t
    elif method == "extrapolated":
        cps = sorted({max(1, int(round(t * f))) for f in np.linspace(0.125, 1.0, 8)})
        D = _distance_paths(g, t, samples, seed, cps)
        s = np.array(cps, dtype=float)
        X = np.column_stack([s, np.sqrt(s), np.ones_like(s)])
        w = np.linalg.pinv(X)[0]  # row giving the slope as a combination of checkpoint means
        y = D @ w
    else:
        raise ValueError(f"unknown method {method!r}")
    return RwStats("speed", float(y.mean()), float(y.std(ddof=1) / math.sqrt(samples)), samples,
                   {"t": t, "method": method})


# ---------------------------------------------------------------------------
# exit times


def exact_exit_time(g: Graph, region) -> float:
    """E_o[T_A] from E_x[T] = 1 + mean_{y ~ x} E_y[T] on A, E = 0 off A."""
    region = sorted(set(region))
    if len(region) > EXIT_UNKNOWNS_CAP:
        raise ValueError(f"{len(region)} unknowns exceed the cap {EXIT_UNKNOWNS_CAP}")
    if g.origin not in set(region):
        return 0.0
    idx = {v: i for i, v in enumerate(region)}
    rows, cols, vals = [], [], []
    for v, i in idx.items():
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
        nb = g.neighbors(v)
        for u in nb:
            j = idx.get(u)
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(-1.0 / len(nb))
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(region), len(region)))
    T = spsolve(A.tocsc(), np.ones(len(region)))
    return float(np.atleast_1d(T)[idx[g.origin]])


def mc_exit_time(g: Graph, region, samples: int, seed: int = 0, cap: int = 10**7) -> RwStats:
    region = set(region)
    rng = random.Random(seed)
    times = np.zeros(samples)
    cache: dict = {}
    for i in range(samples):
        v = g.origin
        k = 0
        while v in region and k < cap:
            nb = cache.get(v)
            if nb is None:
                nb = cache[v] = g.neighbors(v)
            v = nb[rng.randrange(len(nb))]
            k += 1
        times[i] = k
    return RwStats("exit-time", float(times.mean()), float(times.std(ddof=1) / math.sqrt(samples)),
                   samples)


# ---------------------------------------------------------------------------
# lamplighter Green function


@njit(cache=True)
def _lamp_walks(nwalks, steps, max_dist, seed, out):
    """Accumulate visits per distance shell into out[0..max_dist]."""
    np.random.seed(seed)
    W = steps + 2
    size = 2 * W + 1
    lamps = np.zeros(size, dtype=np.int8)
    for _ in range(nwalks):
        lamps[:] = 0
        y = 0
        lo = 0  # min of lit lamps and {0, y}
        hi = 0
        nlit = 0
        for k in range(steps + 1):
            # distance of the current state
            if nlit == 1 and lo == 0 and hi == 0 and y == 0:
                dist = 2
            else:
                t1 = -lo + (hi - lo) + abs(hi - y)
                t2 = hi + (hi - lo) + abs(y - lo)
                dist = t1 if t1 < t2 else t2
            if dist <= max_dist:
                out[dist] += 1
            if k == steps:
                break
            r = np.random.randint(0, 8)
            s = 1 if (r & 4) else -1
            if r & 1:
                lamps[y + W] ^= 1
                nlit += 1 if lamps[y + W] else -1
            y2 = y + s
            if r & 2:
                lamps[y2 + W] ^= 1
                nlit += 1 if lamps[y2 + W] else -1
            y = y2
            # refresh span: it can only shrink at the ends or grow by one
            if y < lo:
                lo = y
            if y > hi:
                hi = y
            for p in (y - s, y):
                if lamps[p + W] and p < lo:
                    lo = p
                if lamps[p + W] and p > hi:
                    hi = p
            while lo < 0 and lo < y and lamps[lo + W] == 0:
                lo += 1
            while hi > 0 and hi > y and lamps[hi + W] == 0:
                hi -= 1


def mc_green_decay(g: Graph, max_dist: int = 10, samples: int = 100_000, seed: int = 0,
                   steps: int = 400, batches: int = 20) -> RwStats:
    """Fit log g(o, x) against d(o, x) on the lamplighter graph.

    For each distance k the shell average g_k = (expected visits to the shell
    S_k) / |S_k| is estimated from ``samples`` walks of ``steps`` steps. The
    slope of log g_k against k is fitted by least squares; its standard error
    comes from the spread of slopes over independent batches.
    """
    if not isinstance(g, Lamplighter):
        raise ValueError("Green decay estimation is implemented for the lamplighter graph")
    sizes = np.array(g.sphere_sizes(max_dist), dtype=float)
    per = samples // batches
    counts = np.zeros((batches, max_dist + 1))
    for b in range(batches):
        out = np.zeros(max_dist + 1)
        _lamp_walks(per, steps, max_dist, seed * 1_000_003 + b, out)
        counts[b] = out
    n = per * batches
    ghat = counts.sum(axis=0) / n / sizes
    ks = np.arange(max_dist + 1)
    keep = ghat > 0
    dropped = [int(k) for k in ks[~keep]]
    slope, icept = np.polyfit(ks[keep], np.log(ghat[keep]), 1)
    bslopes = []
    for b in range(batches):
        gb = counts[b] / per / sizes
        kb = gb > 0
        if kb.sum() >= 3:
            bslopes.append(np.polyfit(ks[kb], np.log(gb[kb]), 1)[0])
    bslopes = np.array(bslopes)
    stderr = float(bslopes.std(ddof=1) / math.sqrt(len(bslopes))) if len(bslopes) > 1 else float("inf")
    return RwStats("green-decay", float(slope), stderr, n,
                   {"intercept": float(icept), "g_hat": ghat.tolist(), "dropped": dropped,
                    "sizes": sizes.tolist(), "steps": steps})
