"""Lazily materialized infinite graph families.

Every family exposes the same small surface: ``origin``, ``neighbors(v)``,
``degree(v)``, ``distance(v)`` (graph distance from the origin, in closed
form), ``ball(n)`` and a text encoding of vertices used by the CLI and the
CSV dumps.

Vertex keys are plain hashable, totally ordered Python values:

* lattice ``Z^d``: ``tuple[int, ...]`` of length d
* comb: ``(x, y)``
* d-ary tree / regular tree: tuple of child indices from the root
* product of regular trees: ``(path_u, path_v)``
* Galton-Watson tree: ``int`` node index into the tree's arena
* lamplighter: ``(lamps, y)`` with ``lamps`` a sorted tuple of lit positions
"""

from __future__ import annotations

import math
import random
import threading
from collections import deque
from typing import Hashable, Iterable, Sequence

Vertex = Hashable

DEFAULT_BALL_CAP = 5_000_000


class GraphError(ValueError):
    """Invalid vertex key or family parameters."""


class ResourceError(RuntimeError):
    """A requested enumeration exceeds its configured size cap."""


class Graph:
    """Base class for the infinite, locally finite, connected families."""

    spec: str = ""
    origin: Vertex = None

    def neighbors(self, v: Vertex) -> tuple:
        raise NotImplementedError

    def degree(self, v: Vertex) -> int:
        return len(self.neighbors(v))

    def distance(self, v: Vertex) -> int:
        raise NotImplementedError

    def validate(self, v: Vertex) -> None:
        raise NotImplementedError

    def encode(self, v: Vertex) -> str:
        raise NotImplementedError

    def decode(self, text: str) -> Vertex:
        raise NotImplementedError

    def ball(self, n: int, cap: int = DEFAULT_BALL_CAP) -> list:
        """Vertices at distance < n from the origin, in lexicographic order."""
        if n < 0:
            raise GraphError(f"ball radius must be nonnegative, got {n}")
        if n == 0:
            return []
        seen = {self.origin}
        frontier = [self.origin]
        for _ in range(n - 1):
            nxt = []
            for v in frontier:
                for u in self.neighbors(v):
                    if u not in seen:
                        seen.add(u)
                        nxt.append(u)
                        if len(seen) > cap:
                            raise ResourceError(
                                f"|B_{n}| exceeds cap {cap} on {self.spec}")
            frontier = nxt
        return sorted(seen)

    def volume(self, n: int, cap: int = DEFAULT_BALL_CAP) -> int:
        return len(self.ball(n, cap))

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.spec}>"


def _encode_ints(v: Sequence[int]) -> str:
    return "(" + ",".join(str(c) for c in v) + ")"


def _decode_ints(text: str) -> tuple:
    body = text.strip()
    if not (body.startswith("(") and body.endswith(")")):
        raise GraphError(f"bad vertex encoding {text!r}")
    body = body[1:-1].strip()
    if not body:
        return ()
    return tuple(int(c) for c in body.split(","))


class Lattice(Graph):
    """The integer lattice Z^d with nearest-neighbour edges."""

    def __init__(self, d: int):
        if d < 1:
            raise GraphError(f"lattice dimension must be >= 1, got {d}")
        self.d = d
        self.spec = f"lattice:d={d}"
        self.origin = (0,) * d
        self._steps = []
        for i in range(d):
            for s in (-1, 1):
                e = [0] * d
                e[i] = s
                self._steps.append(tuple(e))

    def neighbors(self, v):
        return tuple(sorted(tuple(a + b for a, b in zip(v, e)) for e in self._steps))

    def degree(self, v):
        return 2 * self.d

    def distance(self, v):
        return sum(abs(c) for c in v)

    def validate(self, v):
        if not (isinstance(v, tuple) and len(v) == self.d
                and all(isinstance(c, int) for c in v)):
            raise GraphError(f"{v!r} is not a vertex of Z^{self.d}")

    def encode(self, v):
        return _encode_ints(v)

    def decode(self, text):
        v = _decode_ints(text)
        self.validate(v)
        return v

    def ball(self, n, cap=DEFAULT_BALL_CAP):
        if n <= 0:
            return []
        # |B_n| grows polynomially; enumerate the L1 diamond directly
        out = []

        def rec(prefix, budget):
            if len(prefix) == self.d:
                out.append(tuple(prefix))
                if len(out) > cap:
                    raise ResourceError(f"|B_{n}| exceeds cap {cap} on {self.spec}")
                return
            for c in range(-budget, budget + 1):
                prefix.append(c)
                rec(prefix, budget - abs(c))
                prefix.pop()

        rec([], n - 1)
        return out


class Comb(Graph):
    """Z^2 with every horizontal edge removed except those on the x axis."""

    spec = "comb"
    origin = (0, 0)

    def neighbors(self, v):
        x, y = v
        if y == 0:
            return ((x - 1, 0), (x, -1), (x, 1), (x + 1, 0))
        return ((x, y - 1), (x, y + 1))

    def degree(self, v):
        return 4 if v[1] == 0 else 2

    def distance(self, v):
        return abs(v[0]) + abs(v[1])

    def validate(self, v):
        if not (isinstance(v, tuple) and len(v) == 2
                and all(isinstance(c, int) for c in v)):
            raise GraphError(f"{v!r} is not a comb vertex")

    def encode(self, v):
        return _encode_ints(v)

    def decode(self, text):
        v = _decode_ints(text)
        self.validate(v)
        return v

    def ball(self, n, cap=DEFAULT_BALL_CAP):
        if n <= 0:
            return []
        out = [(x, y) for x in range(-(n - 1), n) for y in range(-(n - 1 - abs(x)), n - abs(x))]
        if len(out) > cap:
            raise ResourceError(f"|B_{n}| exceeds cap {cap} on comb")
        return sorted(out)


class _PathTree(Graph):
    """Shared machinery for trees whose vertices are child-index paths."""

    root_children: int
    children: int

    def neighbors(self, v):
        if not v:
            return tuple((i,) for i in range(self.root_children))
        return (v[:-1],) + tuple(v + (i,) for i in range(self.children))

    def degree(self, v):
        return self.root_children if not v else self.children + 1

    def distance(self, v):
        return len(v)

    def validate(self, v):
        if not isinstance(v, tuple) or not all(isinstance(c, int) for c in v):
            raise GraphError(f"{v!r} is not a tree path")
        if v and not 0 <= v[0] < self.root_children:
            raise GraphError(f"{v!r}: root child index out of range")
        if any(not 0 <= c < self.children for c in v[1:]):
            raise GraphError(f"{v!r}: child index out of range")

    def encode(self, v):
        return "r" + "".join(f".{c}" for c in v)

    def decode(self, text):
        parts = text.strip().split(".")
        if parts[0] != "r":
            raise GraphError(f"bad tree vertex encoding {text!r}")
        v = tuple(int(c) for c in parts[1:])
        self.validate(v)
        return v

    def level_size(self, k: int) -> int:
        if k == 0:
            return 1
        return self.root_children * self.children ** (k - 1)


class DaryTree(_PathTree):
    """Rooted tree in which every vertex has d children (root degree d)."""

    def __init__(self, d: int):
        if d < 2:
            raise GraphError(f"d-ary tree needs d >= 2, got {d}")
        self.d = d
        self.root_children = d
        self.children = d
        self.spec = f"dary:d={d}"
        self.origin = ()


class RegularTree(_PathTree):
    """The (d+1)-regular tree; the root's extra branch is child index d."""

    def __init__(self, d: int):
        if d < 1:
            raise GraphError(f"regular tree needs d >= 1, got {d}")
        self.d = d
        self.root_children = d + 1
        self.children = d
        self.spec = f"regtree:d={d}"
        self.origin = ()


class ProductTree(Graph):
    """Cartesian product of the (d+1)- and (k+1)-regular trees."""

    def __init__(self, d: int, k: int):
        if not (d >= k >= 1 and d + k >= 3):
            raise GraphError(f"product of trees needs d >= k >= 1 and d + k >= 3, got d={d}, k={k}")
        self.d, self.k = d, k
        self.left = RegularTree(d)
        self.right = RegularTree(k)
        self.spec = f"prodtree:d={d},k={k}"
        self.origin = ((), ())

    def neighbors(self, v):
        u, w = v
        out = [(a, w) for a in self.left.neighbors(u)]
        out += [(u, b) for b in self.right.neighbors(w)]
        return tuple(sorted(out))

    def degree(self, v):
        return self.d + self.k + 2

    def distance(self, v):
        return len(v[0]) + len(v[1])

    def validate(self, v):
        if not (isinstance(v, tuple) and len(v) == 2):
            raise GraphError(f"{v!r} is not a product-tree vertex")
        self.left.validate(v[0])
        self.right.validate(v[1])

    def encode(self, v):
        return self.left.encode(v[0]) + "|" + self.right.encode(v[1])

    def decode(self, text):
        a, sep, b = text.partition("|")
        if not sep:
            raise GraphError(f"bad product-tree vertex encoding {text!r}")
        return (self.left.decode(a), self.right.decode(b))


class GWArena:
    """Node store of one Galton-Watson tree.

    Children of a node are sampled on first access from a generator seeded by
    (seed, attempt, path-from-root), so the tree never depends on the order in
    which nodes happen to be explored.
    """

    def __init__(self, offspring: Sequence[tuple[int, float]], seed: int, attempt: int = 0):
        self.offspring = tuple((int(c), float(q)) for c, q in offspring)
        self.seed = seed
        self.attempt = attempt
        self.parent = [-1]
        self.depth = [0]
        self.path = [()]
        self.kids: list = [None]
        self._lock = threading.Lock()
        counts, probs = zip(*self.offspring)
        self._counts = counts
        self._cum = []
        acc = 0.0
        for q in probs:
            acc += q
            self._cum.append(acc)

    def __len__(self):
        return len(self.parent)

    def _draw(self, path: tuple) -> int:
        rng = random.Random(f"gw/{self.seed}/{self.attempt}/{'.'.join(map(str, path))}")
        u = rng.random() * self._cum[-1]
        for c, edge in zip(self._counts, self._cum):
            if u < edge:
                return c
        return self._counts[-1]

    def children(self, i: int) -> tuple:
        kids = self.kids[i]
        if kids is not None:
            return kids
        with self._lock:
            if self.kids[i] is None:
                count = self._draw(self.path[i])
                start = len(self.parent)
                for j in range(count):
                    self.parent.append(i)
                    self.depth.append(self.depth[i] + 1)
                    self.path.append(self.path[i] + (j,))
                    self.kids.append(None)
                self.kids[i] = tuple(range(start, start + count))
            return self.kids[i]

    def level_sizes(self, depth: int) -> list[int]:
        sizes = []
        level = [0]
        for _ in range(depth + 1):
            sizes.append(len(level))
            level = [c for v in level for c in self.children(v)]
        return sizes


def _check_offspring(offspring: Sequence[tuple[int, float]]) -> float:
    if not offspring:
        raise GraphError("empty offspring distribution")
    total = sum(q for _, q in offspring)
    if abs(total - 1.0) > 1e-9:
        raise GraphError(f"offspring probabilities sum to {total}, not 1")
    if any(q < 0 or c < 0 for c, q in offspring):
        raise GraphError("offspring counts and probabilities must be nonnegative")
    return sum(c * q for c, q in offspring)


def gw_materialize(offspring, seed: int, depth: int, max_attempts: int = 10_000) -> GWArena:
    """Sample a Galton-Watson tree surviving to ``depth``.

    Extinct samples are rejected and resampled with the next attempt index,
    which conditions on survival to the requested depth.
    """
    mean = _check_offspring(offspring)
    if mean <= 1:
        raise GraphError(f"offspring mean must exceed 1, got {mean}")
    if depth < 0:
        raise GraphError("depth must be nonnegative")
    for attempt in range(max_attempts):
        arena = GWArena(offspring, seed, attempt)
        if arena.level_sizes(depth)[-1] > 0:
            return arena
    raise RuntimeError(f"no surviving tree in {max_attempts} attempts")


class GaltonWatson(Graph):
    """Galton-Watson tree conditioned on survival; vertices are arena indices."""

    def __init__(self, offspring, seed: int = 0, depth: int = 0, arena: GWArena | None = None):
        self.offspring = tuple((int(c), float(q)) for c, q in offspring)
        self.seed = seed
        self.arena = arena if arena is not None else gw_materialize(self.offspring, seed, depth)
        dist = ",".join(f"{c}:{q:g}" for c, q in self.offspring)
        self.spec = f"gw:dist={dist};seed={seed}"
        self.origin = 0

    def materialize(self, depth: int) -> None:
        """Make sure the arena survives to ``depth`` (resampling if extinct)."""
        if self.arena.level_sizes(depth)[-1] == 0:
            self.arena = gw_materialize(self.offspring, self.seed, depth)

    def neighbors(self, v):
        self.validate(v)
        kids = self.arena.children(v)
        parent = self.arena.parent[v]
        return ((parent,) + kids) if parent >= 0 else kids

    def distance(self, v):
        self.validate(v)
        return self.arena.depth[v]

    def validate(self, v):
        if not isinstance(v, int) or not 0 <= v < len(self.arena):
            raise GraphError(f"{v!r} is not a node of this arena")

    def encode(self, v):
        return f"#{v}"

    def decode(self, text):
        if not text.startswith("#"):
            raise GraphError(f"bad GW vertex encoding {text!r}")
        v = int(text[1:])
        self.validate(v)
        return v


def lamplighter_distance(lamps: Iterable[int], y: int) -> int:
    """Word length of (lamps, y) for the randomize-move-randomize generators.

    The lighter starts at 0, must pass every lit lamp and finish at y; each
    step can toggle the lamp it leaves and the lamp it reaches.
    """
    lamps = tuple(lamps)
    lo = min(lamps + (0, y))
    hi = max(lamps + (0, y))
    tour = min(-lo + (hi - lo) + abs(hi - y), hi + (hi - lo) + abs(y - lo))
    if tour == 0 and lamps:
        # only the lamp at 0 is lit and y = 0: a closed walk of length 2 is needed
        return 2
    return tour


class Lamplighter(Graph):
    """Cayley graph of Z_2 wr Z for the randomize-move-randomize step (8-regular)."""

    spec = "lamplighter"
    origin = ((), 0)

    def neighbors(self, v):
        lamps, y = v
        on = set(lamps)
        out = []
        for s in (-1, 1):
            for a in (0, 1):
                for b in (0, 1):
                    new = set(on)
                    if a:
                        new ^= {y}
                    if b:
                        new ^= {y + s}
                    out.append((tuple(sorted(new)), y + s))
        return tuple(sorted(out))

    def degree(self, v):
        return 8

    def distance(self, v):
        return lamplighter_distance(v[0], v[1])

    def validate(self, v):
        ok = (isinstance(v, tuple) and len(v) == 2 and isinstance(v[0], tuple)
              and isinstance(v[1], int) and all(isinstance(c, int) for c in v[0])
              and list(v[0]) == sorted(set(v[0])))
        if not ok:
            raise GraphError(f"{v!r} is not a canonical lamplighter element")

    def encode(self, v):
        return "{" + ",".join(str(c) for c in v[0]) + "}@" + str(v[1])

    def decode(self, text):
        lamps, sep, y = text.strip().partition("@")
        if not sep or not (lamps.startswith("{") and lamps.endswith("}")):
            raise GraphError(f"bad lamplighter encoding {text!r}")
        body = lamps[1:-1].strip()
        on = tuple(sorted({int(c) for c in body.split(",")})) if body else ()
        return (on, int(y))

    def sphere_sizes(self, kmax: int) -> list[int]:
        """Number of elements at each distance 0..kmax, by direct counting."""
        sizes = [0] * (kmax + 1)
        # an element is determined by its span [lo, hi] (containing 0 and y),
        # its position y, and lamps inside the span; lo / hi must be lit unless
        # they coincide with 0 or y
        for lo in range(-kmax, 1):
            for hi in range(0, kmax + 1):
                if hi - lo > kmax:
                    continue
                for y in range(lo, hi + 1):
                    tour = min(-lo + (hi - lo) + abs(hi - y), hi + (hi - lo) + abs(y - lo))
                    forced = {p for p in (lo, hi) if p not in (0, y)}
                    free = (hi - lo + 1) - len(forced)
                    if tour == 0:
                        sizes[0] += 1
                        if kmax >= 2:
                            sizes[2] += 1  # the lamp at 0 lit
                        continue
                    if tour <= kmax:
                        sizes[tour] += 2 ** free
        return sizes


def parse_graph(spec: str) -> Graph:
    """Build a family from its CLI string, e.g. ``lattice:d=2`` or ``gw:dist=0:0.5,2:0.5;seed=42``."""
    name, _, rest = spec.strip().partition(":")
    params: dict[str, str] = {}
    if rest:
        sep = ";" if name == "gw" else ","
        for item in rest.split(sep):
            if not item:
                continue
            key, eq, val = item.partition("=")
            if not eq:
                raise GraphError(f"bad parameter {item!r} in {spec!r}")
            params[key.strip()] = val.strip()
    try:
        if name == "lattice":
            return Lattice(int(params.get("d", 2)))
        if name == "comb":
            return Comb()
        if name == "dary":
            return DaryTree(int(params.get("d", 2)))
        if name == "regtree":
            return RegularTree(int(params.get("d", 2)))
        if name == "prodtree":
            return ProductTree(int(params["d"]), int(params["k"]))
        if name == "gw":
            dist = []
            for pair in params["dist"].split(","):
                c, _, q = pair.partition(":")
                dist.append((int(c), float(q)))
            return GaltonWatson(dist, seed=int(params.get("seed", 0)),
                                depth=int(params.get("depth", 0)))
        if name == "lamplighter":
            return Lamplighter()
    except KeyError as exc:
        raise GraphError(f"missing parameter {exc} in {spec!r}") from None
    raise GraphError(f"unknown graph family {name!r}")


def bfs_distances(graph: Graph, radius: int) -> dict:
    """Breadth-first distances from the origin up to ``radius`` (test oracle)."""
    dist = {graph.origin: 0}
    queue = deque([graph.origin])
    while queue:
        v = queue.popleft()
        if dist[v] == radius:
            continue
        for u in graph.neighbors(v):
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def l2_ball_volume(d: int, r: float, closed: bool = False) -> int:
    """Number of lattice points x in Z^d with ||x||_2 < r (or <= r if ``closed``)."""
    if r < 0:
        return 0
    r2 = r * r
    m = math.isqrt(int(math.floor(r2))) if r2 >= 0 else 0

    def ok(budget):
        return budget >= 0 if closed else budget > 0

    def rec(dim, budget):
        if dim == 0:
            return 1 if ok(budget) else 0
        total = 0
        for c in range(-m, m + 1):
            if ok(budget - c * c) or (dim > 1 and budget - c * c >= 0):
                total += rec(dim - 1, budget - c * c)
        return total

    return rec(d, r2)
