"""Divisible sandpile on Z^d: every site keeps mass 1 and splits its excess evenly."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .graphs import Lattice, l2_ball_volume
from .mass import MassDist

ORDERS = ("distance-lex", "checkerboard", "parallel")


class ParameterError(ValueError):
    pass


@dataclass
class SandpileResult:
    field: np.ndarray  # d-dimensional, centered at index (half, ..., half)
    odometer: np.ndarray
    half: int
    occupied: np.ndarray  # integer coordinates of D_m, shape (k, d)
    sweeps: int
    order: str
    moves: int = 0

    def inradius(self) -> float:
        """min ||x||_2 over sites outside D_m."""
        occ = np.zeros(self.field.shape, dtype=bool)
        occ[tuple((self.occupied + self.half).T)] = True
        r = _norms(self.field.shape, self.half)
        return float(r[~occ].min())

    def outradius(self) -> float:
        """max ||x||_2 over sites of D_m."""
        return float(np.sqrt((self.occupied.astype(float) ** 2).sum(axis=1)).max())

    def to_dist(self, graph=None, scale: float = 1.0) -> MassDist:
        d = self.field.ndim
        g = graph if graph is not None else Lattice(d)
        idx = np.argwhere(self.field > 0)
        mu = MassDist(g, {})
        mu.masses = {tuple(int(c) - self.half for c in i): float(self.field[tuple(i)]) * scale
                     for i in idx}
        return mu


def _norms(shape, half):
    grids = np.indices(shape) - half
    return np.sqrt((grids.astype(float) ** 2).sum(axis=0))


@njit(cache=True)
def _sweep_sequential(f, u, order, strides):
    """One pass over ``order`` toppling any excess; returns (max mass after the pass, moves)."""
    nn = 2 * strides.shape[0]
    moves = 0
    for i in order:
        e = f[i] - 1.0
        if e > 0.0:
            moves += 1
            f[i] = 1.0
            u[i] += e
            s = e / nn
            for st in strides:
                f[i + st] += s
                f[i - st] += s
    mx = 0.0
    for i in order:
        if f[i] > mx:
            mx = f[i]
    return mx, moves


@njit(cache=True)
def _max_on(f, idx):
    mx = 0.0
    for i in idx:
        if f[i] > mx:
            mx = f[i]
    return mx


def _layout(d, half):
    shape = (2 * half + 1,) * d
    strides = np.array([int(np.prod(shape[k + 1:])) for k in range(d)], dtype=np.int64)
    grids = np.indices(shape) - half
    interior = np.all(np.abs(grids) < half, axis=0).ravel()
    return shape, strides, grids.reshape(d, -1), interior


def sandpile_stabilize(d: int, m: float, eps: float = 1e-8, order: str = "distance-lex",
                       sweep_cap: int = 10**7, half: int | None = None) -> SandpileResult:
    """Stabilize mass ``m`` at the origin until every site holds <= 1 + eps.

    ``order`` selects the toppling sequence: ``distance-lex`` visits sites by
    L1 distance then lexicographically, ``checkerboard`` sweeps the two colour
    classes alternately, ``parallel`` topples every unstable site at once.
    The box grows automatically if mass reaches its boundary layer.
    """
    if order not in ORDERS:
        raise ValueError(f"unknown order {order!r}")
    if m <= 0 or eps <= 0:
        raise ParameterError("m and eps must be positive")
    if half is None:
        r = (m / _unit_ball_volume(d)) ** (1.0 / d)
        half = int(math.ceil(r)) + 4
    f = np.zeros((2 * half + 1,) * d)
    f[(half,) * d] = m
    u = np.zeros_like(f)
    sweeps = 0
    moves = 0
    while True:
        shape, strides, coords, interior = _layout(d, half)
        flat, odo = f.ravel().copy(), u.ravel().copy()
        inner = np.nonzero(interior)[0]
        if order == "distance-lex":
            l1 = np.abs(coords[:, inner]).sum(axis=0)
            keys = [coords[k, inner] for k in range(d - 1, -1, -1)] + [l1]
            seq = inner[np.lexsort(keys)]
        elif order == "checkerboard":
            par = coords[:, inner].sum(axis=0) % 2
            seq = np.concatenate([inner[par == 0], inner[par == 1]])
        else:
            seq = inner
        boundary = np.nonzero(~interior)[0]
        grown = False
        while sweeps < sweep_cap:
            if order == "parallel":
                mx, k = _parallel_step(flat, odo, strides, interior)
            else:
                mx, k = _sweep_sequential(flat, odo, seq, strides)
            moves += k
            sweeps += 1
            if _max_on(flat, boundary) > 0:
                grown = True
                break
            if mx <= 1.0 + eps:
                break
        f, u = flat.reshape(shape), odo.reshape(shape)
        if not grown:
            break
        new = half + max(4, half // 4)
        f, u = _pad(f, new - half), _pad(u, new - half)
        half = new
    if sweeps >= sweep_cap:
        raise RuntimeError(f"sandpile did not stabilize within {sweep_cap} sweeps")
    occ = np.argwhere(f >= 1.0 - eps) - half
    return SandpileResult(f, u, half, occ, sweeps, order, moves)


def _parallel_step(f, u, strides, interior):
    e = np.where(interior, np.maximum(f - 1.0, 0.0), 0.0)
    k = int(np.count_nonzero(e))
    f -= e
    u += e
    s = e / (2 * len(strides))
    for st in strides:
        f[st:] += s[:-st]
        f[:-st] += s[st:]
    return float(f[interior].max()), k


def _pad(a, k):
    return np.pad(a, k)


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def compare_fields(a: SandpileResult, b: SandpileResult) -> float:
    """Max abs difference of two final fields on their common centered box."""
    h = min(a.half, b.half)
    d = a.field.ndim
    sa = tuple(slice(a.half - h, a.half + h + 1) for _ in range(d))
    sb = tuple(slice(b.half - h, b.half + h + 1) for _ in range(d))
    diff = float(np.abs(a.field[sa] - b.field[sb]).max())
    # anything outside the common box must be zero in the bigger field
    rest = max(a.field.sum() - a.field[sa].sum(), b.field.sum() - b.field[sb].sum())
    return max(diff, float(rest))


def smooth_to_uniform(d: int, n: int, c: float, eps: float = 1e-10,
                      threshold: float | None = None) -> MassDist:
    """Spread unit mass so that every site holds at most 2 / Vol(B_cn) and nothing leaves B_cn.

    Runs the divisible sandpile with site capacity
    h = 2 / ((1 + eps) |{x : ||x||_2 <= cn}|) on total mass 1, i.e. the
    ordinary sandpile on mass 1/h rescaled by h. Both properties are checked
    before returning.
    """
    if not 0 < c < 1:
        raise ParameterError("c must lie in (0, 1)")
    R = c * n
    if R < 2:
        raise ParameterError(f"cn = {R} is below 2")
    vol = l2_ball_volume(d, R, closed=True)
    h = threshold if threshold is not None else 2.0 / ((1 + eps) * vol)
    g = Lattice(d)
    if h >= 1:
        return MassDist.delta(g)
    res = sandpile_stabilize(d, 1.0 / h, eps=eps)
    mu = res.to_dist(g, scale=h)
    mu.moves = res.moves
    cap = 2.0 / vol
    for v, w in mu.masses.items():
        if w > cap:
            raise ParameterError(f"mass {w} at {v} exceeds {cap}")
        if sum(x * x for x in v) > R * R:
            raise ParameterError(f"support reaches {v}, outside the ball of radius {R}")
    return mu
