"""Moments and energy of mass distributions, and the energy / second-moment check."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..graphs import GaltonWatson, Lattice, _PathTree
from ..mass import MassDist
from .kernel import KernelRangeError, KernelTable


class Unsupported(TypeError):
    pass


def second_moment(mu: MassDist):
    """M2 = sum mu(v) ||v||_2^2 on Z^d (exact in rational mode)."""
    if not isinstance(mu.graph, Lattice):
        raise Unsupported("second moment needs a lattice distribution")
    zero = Fraction(0) if mu.exact else 0.0
    return sum((m * sum(c * c for c in v) for v, m in mu.masses.items()), zero)


def _is_tree(g) -> bool:
    return isinstance(g, (_PathTree, GaltonWatson))


def avg_level(mu: MassDist):
    """M1 = sum mu(v) level(v) on a rooted tree."""
    if not _is_tree(mu.graph):
        raise Unsupported("average level needs a tree distribution")
    zero = Fraction(0) if mu.exact else 0.0
    dist = mu.graph.distance
    return sum((m * dist(v) for v, m in mu.masses.items()), zero)


def find_large_mass(mu: MassDist, level: int, d: int | None = None):
    """A vertex at level <= ``level`` holding mass >= d^-(level+1)/4, or None.

    Such a vertex always exists when the average level is at most ``level``.
    """
    if not _is_tree(mu.graph):
        raise Unsupported("needs a tree distribution")
    if d is None:
        d = getattr(mu.graph, "d", None)
        if d is None:
            raise ValueError("branching number d required")
    bound = Fraction(1, 4 * d ** (level + 1)) if mu.exact else 1.0 / (4 * d ** (level + 1))
    dist = mu.graph.distance
    best = None
    for v, m in mu.masses.items():
        if dist(v) <= level and m >= bound:
            if best is None or m > best[1] or (m == best[1] and v < best[0]):
                best = (v, m)
    return None if best is None else best[0]


def _support_array(mu: MassDist):
    keys = list(mu.masses)
    pts = np.array(keys, dtype=np.int64).reshape(len(keys), -1)
    w = np.array([float(mu.masses[k]) for k in keys])
    return keys, pts, w


def energy(mu: MassDist, kernel: KernelTable | None = None):
    """E_a[mu] = sum_{x,y} a(x - y) mu(x) mu(y).

    On Z^1 without a kernel the exact a(x) = |x| is used (rational in exact mode).
    """
    g = mu.graph
    if not isinstance(g, Lattice):
        raise Unsupported("energy needs a lattice distribution")
    if kernel is None:
        if g.d != 1:
            raise ValueError("a kernel table is required for d >= 2")
        items = sorted(mu.masses.items())
        if mu.exact:
            # sum_{x<y} (y - x) mu(x) mu(y), doubled, via prefix sums
            tot = Fraction(0)
            pre_m = Fraction(0)
            pre_xm = Fraction(0)
            for (x,), m in items:
                tot += m * (x * pre_m - pre_xm)
                pre_m += m
                pre_xm += x * m
            return 2 * tot
        xs = np.array([v[0] for v, _ in items], dtype=float)
        ms = np.array([float(m) for _, m in items])
        return float(ms @ np.abs(xs[:, None] - xs[None, :]) @ ms)
    if kernel.d != g.d:
        raise ValueError("kernel dimension mismatch")
    keys, pts, w = _support_array(mu)
    if not keys:
        return 0.0
    span = pts.max(axis=0) - pts.min(axis=0)
    if span.max() > kernel.L:
        raise KernelRangeError(f"support spans {int(span.max())} > kernel box L={kernel.L}")
    total = 0.0
    # row blocks keep the pairwise table small
    block = max(1, 2_000_000 // max(1, len(keys)))
    for i in range(0, len(keys), block):
        diff = pts[i:i + block, None, :] - pts[None, :, :]
        vals = kernel.lookup(diff.reshape(-1, g.d)).reshape(diff.shape[:2])
        total += float(w[i:i + block] @ vals @ w)
    return total


@dataclass
class EnergyReport:
    t: int
    lhs: float  # t (E_t - E_0)
    rhs: float  # (M2_t - M2_0)^2
    slack: float
    tol: float
    ok: bool


def check_energy_m2(initial: MassDist, final: MassDist, t: int,
                    kernel: KernelTable | None = None) -> EnergyReport:
    """t (E[mu_t] - E[mu_0]) >= (M2[mu_t] - M2[mu_0])^2, up to a tolerance.

    The tolerance is 1e-9 in d = 1 (exact kernel) and 2 t tol_kernel + 1e-9
    otherwise, since each energy carries a relative kernel error of at most
    tol_kernel and the energy difference is multiplied by t.
    """
    e0 = energy(initial, kernel)
    e1 = energy(final, kernel)
    m0 = second_moment(initial)
    m1 = second_moment(final)
    lhs = t * (e1 - e0)
    rhs = (m1 - m0) ** 2
    ktol = 0.0 if kernel is None or kernel.d == 1 else kernel.tol
    tol = 1e-9 + 2 * t * ktol
    if initial.exact and final.exact and kernel is None:
        slack = lhs - rhs
        return EnergyReport(t, lhs, rhs, slack, 0.0, slack >= 0)
    slack = float(lhs) - float(rhs)
    return EnergyReport(t, float(lhs), float(rhs), slack, tol, slack >= -tol)


def check_trace(initial: MassDist, trace, kernel: KernelTable | None = None) -> EnergyReport:
    """Replay ``trace`` from ``initial`` and check the energy / second-moment inequality."""
    final = initial.copy(record=False).replay(trace.records)
    return check_energy_m2(initial, final, len(trace.records), kernel)
