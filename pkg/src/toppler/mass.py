"""Sparse mass distributions and toppling moves.

A distribution is a dict ``vertex -> mass``. Float mode stores Python floats,
exact mode stores ``fractions.Fraction``. Toppling ``m`` at ``v`` removes ``m``
from ``v`` and adds ``m / deg(v)`` to every neighbour.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple

from .graphs import Graph

CLAMP_TOL = 1e-12


class InvalidMove(ValueError):
    pass


class ToppleRecord(NamedTuple):
    index: int
    vertex: object
    mass: float
    before: float  # mass at the vertex just before the move


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def masses(self) -> list:
        return [r.mass for r in self.records]


class MassDist:
    """Finitely supported mass distribution on a graph."""

    def __init__(self, graph: Graph, masses: dict | None = None, exact: bool = False,
                 record: bool = False):
        self.graph = graph
        self.exact = exact
        one = Fraction(1) if exact else 1.0
        if masses is None:
            masses = {graph.origin: one}
        conv = Fraction if exact else float
        self.masses = {v: conv(m) for v, m in masses.items() if m != 0}
        if any(m < 0 for m in self.masses.values()):
            raise ValueError("negative mass in initial distribution")
        self.moves = 0
        self.clamps = 0
        self.trace: RunTrace | None = RunTrace() if record else None
        self.radius: int | None = None
        self._outside = 0
        self._degree: Callable = graph.degree
        self._neighbors: Callable = graph.neighbors
        self._distance: Callable = graph.distance

    @classmethod
    def delta(cls, graph: Graph, v=None, exact: bool = False, record: bool = False) -> "MassDist":
        v = graph.origin if v is None else v
        return cls(graph, {v: 1}, exact=exact, record=record)

    def copy(self, record: bool | None = None) -> "MassDist":
        out = MassDist.__new__(MassDist)
        out.__dict__.update(self.__dict__)
        out.masses = dict(self.masses)
        if record is None:
            out.trace = RunTrace(list(self.trace.records)) if self.trace is not None else None
        else:
            out.trace = RunTrace() if record else None
        return out

    def __getitem__(self, v):
        return self.masses.get(v, 0)

    def __len__(self):
        return len(self.masses)

    def items(self):
        return self.masses.items()

    def total(self):
        return sum(self.masses.values(), Fraction(0) if self.exact else 0.0)

    # -- outside-mass bookkeeping -------------------------------------------------
    def register_radius(self, n: int) -> None:
        """Track mass at distance >= n incrementally from now on."""
        self.radius = n
        self._outside = self._sum_outside(n)

    def _sum_outside(self, n: int):
        d = self._distance
        zero = Fraction(0) if self.exact else 0.0
        return sum((m for v, m in self.masses.items() if d(v) >= n), zero)

    def mass_outside(self, n: int | None = None):
        """Mass at graph distance >= n from the origin."""
        if n is None or n == self.radius:
            if self.radius is None:
                raise ValueError("no radius registered")
            return self._outside
        return self._sum_outside(n)

    # -- moves --------------------------------------------------------------------
    def topple(self, v, m=None) -> tuple:
        """Topple mass ``m`` at ``v`` (all of it when ``m`` is None); returns the neighbours."""
        masses = self.masses
        cur = masses.get(v, 0)
        if m is None:
            m = cur
            if not cur > 0:
                raise InvalidMove(f"no mass at {v!r}")
        else:
            if self.exact:
                m = Fraction(m)
            if not m > 0:
                raise InvalidMove(f"toppled mass must be positive, got {m}")
        rest = cur - m
        if rest < 0:
            if self.exact or rest < -CLAMP_TOL:
                raise InvalidMove(f"cannot topple {m} at {v!r} holding {cur}")
            self.clamps += 1
            rest = 0.0
        nbrs = self._neighbors(v)
        share = m / len(nbrs)
        radius = self.radius
        if rest == 0:
            masses.pop(v, None)
        else:
            masses[v] = rest
        for u in nbrs:
            masses[u] = masses.get(u, 0) + share
        if radius is not None:
            dist = self._distance
            if dist(v) >= radius:
                self._outside -= m
            for u in nbrs:
                if dist(u) >= radius:
                    self._outside += share
        self.moves += 1
        if self.trace is not None:
            self.trace.records.append(ToppleRecord(self.moves, v, m, cur))
        return nbrs

    def full_topple(self, v) -> tuple:
        return self.topple(v, None)

    def replay(self, records: Iterable[ToppleRecord]) -> "MassDist":
        for r in records:
            self.topple(r.vertex, r.mass)
        return self

    # -- numeric-mode cross checks ------------------------------------------------
    def to_exact(self) -> "MassDist":
        """Rational copy; floats convert exactly (every float is dyadic)."""
        out = MassDist(self.graph, {v: Fraction(m) for v, m in self.masses.items()}, exact=True)
        out.moves = self.moves
        return out

    def to_float(self) -> "MassDist":
        out = MassDist(self.graph, {v: float(m) for v, m in self.masses.items()})
        out.moves = self.moves
        return out

    def snapshot(self) -> dict:
        return dict(self.masses)

    # -- persistence --------------------------------------------------------------
    def dump_csv(self, fh=None) -> str:
        """CSV ``vertex_encoding,mass`` sorted by encoding; returns the text."""
        enc = self.graph.encode
        rows = sorted((enc(v), m) for v, m in self.masses.items())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["vertex_encoding", "mass"])
        for e, m in rows:
            w.writerow([e, repr(float(m)) if not self.exact else str(m)])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def compare(a: MassDist, b: MassDist) -> float:
    """Max absolute difference over the union of supports."""
    keys = set(a.masses) | set(b.masses)
    worst = 0.0
    for v in keys:
        diff = abs(Fraction(a[v]) - Fraction(b[v])) if (a.exact or b.exact) else abs(a[v] - b[v])
        worst = max(worst, float(diff))
    return worst


def mass_outside(dist: MassDist, n: int):
    """Mass at distance >= n; the open ball of radius 0 is empty, so n=0 gives the total."""
    return dist._sum_outside(n)
