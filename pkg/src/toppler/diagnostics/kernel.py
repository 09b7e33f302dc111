"""Potential kernel a(x) and Green's function g(x) of simple random walk on Z^d.

The default route writes the (continuous time) heat kernel as a product of
scaled Bessel functions, P_t(x) = prod_j e^{-t/d} I_{x_j}(t/d), and integrates

    a(x) = int_0^inf (P_t(o) - P_t(x)) dt        (d = 2)
    g(x) = int_0^inf P_t(x) dt                   (d >= 3)

with the trapezoid rule in log t, adding the large-t tail analytically.
Since a jump of the continuous-time walk is one step of the discrete walk,
these are the discrete-time quantities. ``method="walk"`` instead sums the
k-step distributions on a padded box with absorbing walls; it is slow and
biased by the walls and is kept only as an audit of small |x|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ive

MAX_L = 64
T_MIN, T_MAX = 1e-12, 1e8  # ive overflows to nan near 5e11


class KernelRangeError(IndexError):
    pass


@dataclass
class KernelTable:
    d: int
    L: int
    a: np.ndarray  # shape (2L+1,)*d, a[(L,)*d] = a(o) = 0
    g: np.ndarray | None  # Green's function for d >= 3
    tol: float
    iterations: int
    method: str = "bessel"
    converged: bool = True
    raw: dict = field(default_factory=dict)

    def lookup(self, diffs: np.ndarray) -> np.ndarray:
        """a(x) for an (k, d) integer array of displacements."""
        diffs = np.asarray(diffs)
        if diffs.size and np.abs(diffs).max() > self.L:
            raise KernelRangeError(f"displacement beyond kernel box L={self.L}")
        idx = tuple((diffs + self.L).T)
        return self.a[idx]

    def __call__(self, x) -> float:
        return float(self.lookup(np.asarray([x]))[0])

    def green(self, x) -> float:
        if self.g is None:
            raise ValueError("Green's function only exists for d >= 3")
        x = np.asarray(x)
        if np.abs(x).max() > self.L:
            raise KernelRangeError(f"{tuple(x)} beyond kernel box L={self.L}")
        return float(self.g[tuple(x + self.L)])


def _nodes(N):
    s = np.linspace(math.log(T_MIN), math.log(T_MAX), N)
    h = s[1] - s[0]
    w = np.full(N, h)
    w[0] = w[-1] = h / 2
    t = np.exp(s)
    return t, w * t


def _quadrant_table(d: int, L: int, N: int) -> np.ndarray:
    """Integral of prod_j P_t(x_j) over t for 0 <= x_j <= L (the d >= 3 Green function,
    or the d = 2 potential kernel before sign flip)."""
    t, wt = _nodes(N)
    I = ive(np.arange(L + 1)[:, None], t[None, :] / d)
    if d == 2:
        A = (I[0] ** 2 * wt).sum() - (I * wt) @ I.T
        r2 = np.add.outer(np.arange(L + 1) ** 2, np.arange(L + 1) ** 2).astype(float)
        A += (r2 / T_MAX - r2 ** 2 / (4 * T_MAX ** 2)) / math.pi
        return A
    # g(x) = sum_t wt * prod_j I[x_j, t], one axis at a time
    if (L + 1) ** (d - 1) * N > 6e7:
        raise ValueError(f"kernel table too large for d={d}, L={L}")
    M = wt[None, :]
    for _ in range(d - 1):
        M = (M[:, None, :] * I[None, :, :]).reshape(-1, N)
    G = (M @ I.T).reshape((L + 1,) * d)
    tail = (d / (2 * math.pi)) ** (d / 2) * T_MAX ** (1 - d / 2) / (d / 2 - 1)
    return G + tail


def _unfold(Q: np.ndarray) -> np.ndarray:
    """Extend a table on the nonnegative orthant to the full symmetric box."""
    out = Q
    for ax in range(Q.ndim):
        flipped = np.flip(np.take(out, range(1, out.shape[ax]), axis=ax), axis=ax)
        out = np.concatenate([flipped, out], axis=ax)
    return out


def potential_kernel(d: int, L: int, tol: float = 1e-9, method: str = "bessel",
                     nodes: int = 3000, pad: int | None = None,
                     max_iter: int = 200_000) -> KernelTable:
    """Kernel table on the box ||x||_inf <= L."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if not 0 <= L <= MAX_L:
        raise ValueError(f"L must lie in [0, {MAX_L}]")
    if d == 1:
        a = np.abs(np.arange(-L, L + 1)).astype(float)
        return KernelTable(1, L, a, None, 0.0, 0, method="exact")
    if method == "walk":
        return _walk_kernel(d, L, tol, pad if pad is not None else 2 * L, max_iter)
    if method != "bessel":
        raise ValueError(f"unknown method {method!r}")
    # the returned table uses 2*nodes; its distance to the nodes-table bounds the error
    Qc = _quadrant_table(d, L, nodes)
    Q = _quadrant_table(d, L, 2 * nodes)
    err = float(np.abs(Q - Qc).max()) + 1e-12
    full = _unfold(Q)
    if d == 2:
        a = full
        g = None
    else:
        g = full
        a = g[(L,) * d] - g
    a[(L,) * d] = 0.0
    return KernelTable(d, L, a, g, err, 2 * nodes, method="bessel", converged=err <= tol,
                       raw={"coarse_nodes": nodes})


def _walk_kernel(d, L, tol, pad, max_iter):
    """Sum of k-step laws on the box of half-width L + pad with absorbing walls."""
    R = L + pad
    shape = (2 * R + 1,) * d
    p = np.zeros(shape)
    p[(R,) * d] = 1.0
    inner = tuple(slice(R - L, R + L + 1) for _ in range(d))
    acc = np.zeros((2 * L + 1,) * d)  # running sum of p_k(o) - p_k(x)  (d=2)  or p_k(x)
    partial = []
    converged = False
    last = None
    k = 0
    while k < max_iter:
        view = p[inner]
        inc = (p[(R,) * d] - view) if d == 2 else view.copy()
        acc += inc
        k += 1
        step = float(np.abs(inc).max())
        if k % 64 == 0:
            partial.append((k, acc.copy()))
        if k > 2 and step < tol:
            converged = True
            break
        q = np.zeros_like(p)
        for ax in range(d):
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            q[tuple(lo)] += p[tuple(hi)]
            q[tuple(hi)] += p[tuple(lo)]
        q /= 2 * d
        # absorbing walls
        for ax in range(d):
            idx = [slice(None)] * d
            idx[ax] = 0
            q[tuple(idx)] = 0
            idx[ax] = -1
            q[tuple(idx)] = 0
        p = q
        last = step
    est = acc.copy()
    if len(partial) >= 3:
        # Aitken extrapolation of the last three checkpoints, entrywise
        (_, s0), (_, s1), (_, s2) = partial[-3:]
        den = s2 - 2 * s1 + s0
        with np.errstate(divide="ignore", invalid="ignore"):
            ait = s2 - (s2 - s1) ** 2 / den
        good = np.isfinite(ait) & (np.abs(den) > 1e-15)
        est = np.where(good, ait, acc)
    if d == 2:
        a, g = est, None
    else:
        g = est
        a = g[(L,) * d] - g
    a = np.array(a)
    a[(L,) * d] = 0.0
    return KernelTable(d, L, a, g, float(last if last is not None else 0.0), k, method="walk",
                       converged=converged, raw={"partial_sums": partial, "plain": acc})


def harmonic_residual(table: KernelTable) -> float:
    """max |Delta a(x) - 1{x = o}| over interior points of the box."""
    a, d, L = table.a, table.d, table.L
    inner = tuple(slice(1, -1) for _ in range(d))
    lap = -a[inner].copy() * 1.0
    acc = np.zeros_like(lap)
    for ax in range(d):
        up = [slice(1, -1)] * d
        dn = [slice(1, -1)] * d
        up[ax] = slice(2, None)
        dn[ax] = slice(0, -2)
        acc += a[tuple(up)] + a[tuple(dn)]
    lap = acc / (2 * d) - a[inner]
    lap[(L - 1,) * d] -= 1.0
    return float(np.abs(lap).max())


def fit_kappa(table: KernelTable, rmin: float = 10, rmax: float = 30) -> tuple:
    """(mean, spread) of a(x) - (2/pi) ln ||x|| over rmin <= ||x|| <= rmax (d = 2)."""
    if table.d != 2:
        raise ValueError("kappa is a planar constant")
    L = table.L
    x = np.arange(-L, L + 1)
    r = np.hypot(x[:, None], x[None, :])
    sel = (r >= rmin) & (r <= rmax)
    vals = table.a[sel] - 2 / math.pi * np.log(r[sel])
    return float(vals.mean()), float(vals.max() - vals.min())


def exact_diagonal(n: int) -> float:
    """a(n, n) on Z^2: (4/pi) sum_{k=1}^n 1/(2k-1)."""
    return 4 / math.pi * sum(1.0 / (2 * k - 1) for k in range(1, n + 1))
