"""Dual-graph model: reliable edges ``E`` inside a superset ``E'`` of links the
scheduler may or may not use, plus generators and constraint validators.

Vertices are the integers ``0..n-1``.  Edges are stored as sorted pairs.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GenerationFailed, InvalidParameter, PreconditionViolation

Edge = tuple[int, int]


def _norm(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class DualGraph:
    n: int
    edges_g: frozenset[Edge]
    edges_gp: frozenset[Edge]
    positions: tuple[tuple[float, float], ...] | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n < 0:
            raise InvalidParameter("vertex count must be nonnegative")
        eg = frozenset(_norm(int(u), int(v)) for u, v in self.edges_g)
        egp = frozenset(_norm(int(u), int(v)) for u, v in self.edges_gp)
        for u, v in egp:
            if u == v:
                raise InvalidParameter(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InvalidParameter(f"edge ({u}, {v}) outside vertex range")
        if not eg <= egp:
            missing = sorted(eg - egp)[:3]
            raise InvalidParameter(f"E must be a subset of E'; missing from E': {missing}")
        object.__setattr__(self, "edges_g", eg)
        object.__setattr__(self, "edges_gp", egp)
        if self.positions is not None:
            pos = tuple((float(x), float(y)) for x, y in self.positions)
            if len(pos) != self.n:
                raise InvalidParameter("positions length must equal n")
            object.__setattr__(self, "positions", pos)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.n:
                raise InvalidParameter("labels length must equal n")
            object.__setattr__(self, "labels", labels)

    @cached_property
    def adj_g(self) -> tuple[tuple[int, ...], ...]:
        return _adjacency(self.n, self.edges_g)

    @cached_property
    def adj_gp(self) -> tuple[tuple[int, ...], ...]:
        return _adjacency(self.n, self.edges_gp)

    @cached_property
    def nbr_g(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(a) for a in self.adj_g)

    @cached_property
    def nbr_gp(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(a) for a in self.adj_gp)

    @cached_property
    def dist_g(self) -> tuple[dict[int, int], ...]:
        """All-pairs G hop distances; unreachable vertices are absent."""
        return tuple(bfs(self.adj_g, s) for s in range(self.n))

    @cached_property
    def component_of(self) -> tuple[int, ...]:
        comp = [-1] * self.n
        for idx, members in enumerate(components(self.adj_g)):
            for v in members:
                comp[v] = idx
        return tuple(comp)

    def label(self, v: int) -> str:
        return self.labels[v] if self.labels else str(v)

    def vertex(self, label: str) -> int:
        if self.labels is None:
            return int(label)
        return self.labels.index(label)

    def is_reliable(self, u: int, v: int) -> bool:
        return v in self.nbr_g[u]

    def extra_edges(self) -> frozenset[Edge]:
        return self.edges_gp - self.edges_g

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges_g": [list(e) for e in sorted(self.edges_g)],
            "edges_gp": [list(e) for e in sorted(self.edges_gp)],
            "positions": [list(p) for p in self.positions] if self.positions is not None else None,
            "labels": list(self.labels) if self.labels is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DualGraph":
        pos = data.get("positions")
        labels = data.get("labels")
        return cls(
            n=int(data["n"]),
            edges_g=frozenset(tuple(e) for e in data["edges_g"]),
            edges_gp=frozenset(tuple(e) for e in data["edges_gp"]),
            positions=tuple(tuple(p) for p in pos) if pos is not None else None,
            labels=tuple(labels) if labels is not None else None,
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def write_graph(g: DualGraph, path: str | Path) -> None:
    Path(path).write_text(g.dumps())


def read_graph(path: str | Path) -> DualGraph:
    return DualGraph.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class GraphMetrics:
    diameter_g: int
    components: tuple[tuple[int, ...], ...]
    diameter_gp: int
    component_diameters: tuple[int, ...] = field(default=())


def _adjacency(n: int, edges: Iterable[Edge]) -> tuple[tuple[int, ...], ...]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    return tuple(tuple(sorted(a)) for a in adj)


def bfs(adj: Sequence[Sequence[int]], source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for w in adj[u]:
            if w not in dist:
                dist[w] = du
                queue.append(w)
    return dist


def components(adj: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    seen: set[int] = set()
    out = []
    for s in range(len(adj)):
        if s in seen:
            continue
        members = sorted(bfs(adj, s))
        seen.update(members)
        out.append(tuple(members))
    return out


def _diameters(adj) -> tuple[int, list[int]]:
    comps = components(adj)
    per_comp = []
    for members in comps:
        per_comp.append(max(max(bfs(adj, v).values()) for v in members))
    return (max(per_comp) if per_comp else 0), per_comp


def metrics(g: DualGraph) -> GraphMetrics:
    d_g, per = _diameters(g.adj_g)
    d_gp, _ = _diameters(g.adj_gp)
    return GraphMetrics(
        diameter_g=d_g,
        components=tuple(components(g.adj_g)),
        diameter_gp=d_gp,
        component_diameters=tuple(per),
    )


# -- generators ----------------------------------------------------------

def make_line(n: int) -> DualGraph:
    if n < 1:
        raise InvalidParameter("line needs n >= 1")
    edges = frozenset((i, i + 1) for i in range(n - 1))
    return DualGraph(n, edges, edges, positions=tuple((float(i), 0.0) for i in range(n)))


def make_star_bridge(k: int) -> DualGraph:
    """Leaves ``u_1..u_{k-1}`` around hub ``u_k`` which alone reaches ``v``.

    Vertex ``i`` is ``u_{i+1}`` for ``i < k`` and vertex ``k`` is ``v``.
    """
    if k < 2:
        raise InvalidParameter("star bridge needs k >= 2")
    hub = k - 1
    edges = {(i, hub) for i in range(k - 1)}
    edges.add((hub, k))
    edges = frozenset(edges)
    labels = tuple(f"u{i + 1}" for i in range(k)) + ("v",)
    return DualGraph(k + 1, edges, edges, labels=labels)


DOUBLE_LINE_ROW_GAP = 1.1


def make_double_line(d: int) -> DualGraph:
    """Two reliable lines ``a_1..a_d`` and ``b_1..b_d`` joined only by the
    crossing unreliable links ``a_i - b_{i+1}`` and ``b_i - a_{i+1}``.

    Vertex ``i-1`` is ``a_i`` and vertex ``d+i-1`` is ``b_i``.  The embedding
    puts the rows 1.1 apart, so it is grey-zone valid for ``c >= 1.5``.
    """
    if d < 2:
        raise InvalidParameter("double line needs d >= 2")
    a = lambda i: i - 1  # noqa: E731
    b = lambda i: d + i - 1  # noqa: E731
    eg = set()
    for i in range(1, d):
        eg.add((a(i), a(i + 1)))
        eg.add((b(i), b(i + 1)))
    egp = set(eg)
    for i in range(1, d):
        egp.add(_norm(a(i), b(i + 1)))
        egp.add(_norm(b(i), a(i + 1)))
    positions = tuple((float(i), 0.0) for i in range(1, d + 1)) + tuple(
        (float(i), DOUBLE_LINE_ROW_GAP) for i in range(1, d + 1)
    )
    labels = tuple(f"a{i}" for i in range(1, d + 1)) + tuple(f"b{i}" for i in range(1, d + 1))
    return DualGraph(2 * d, frozenset(eg), frozenset(egp), positions=positions, labels=labels)


def _dist(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def make_grey_zone(
    n: int,
    c: float = 1.5,
    side: float = 7.0,
    p_link: float = 0.5,
    connected: bool = False,
    seed: int = 0,
    max_tries: int = 1000,
) -> DualGraph:
    """Random geometric dual graph in a ``side x side`` square.

    Pairs within distance 1 are reliable; pairs in ``(1, c]`` become
    unreliable links independently with probability ``p_link``.
    """
    if n < 1:
        raise InvalidParameter("grey zone needs n >= 1")
    if c < 1:
        raise InvalidParameter("grey-zone constant c must be >= 1")
    if side <= 0:
        raise InvalidParameter("side must be positive")
    if not 0.0 <= p_link <= 1.0:
        raise InvalidParameter("p_link must be a probability")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        pts = [(float(x), float(y)) for x, y in rng.uniform(0.0, side, size=(n, 2))]
        eg, egp = set(), set()
        for u in range(n):
            pu = pts[u]
            for v in range(u + 1, n):
                d = _dist(pu, pts[v])
                if d <= 1.0:
                    eg.add((u, v))
                    egp.add((u, v))
                elif d <= c and rng.random() < p_link:
                    egp.add((u, v))
        g = DualGraph(n, frozenset(eg), frozenset(egp), positions=tuple(pts))
        if not connected or len(components(g.adj_g)) == 1:
            return g
    raise GenerationFailed(f"no connected grey-zone graph after {max_tries} tries (n={n}, side={side})")


def make_random_dual(n: int, p_edge: float, p_extra: float, connected: bool = False,
                     seed: int = 0, max_tries: int = 1000) -> DualGraph:
    """Erdos-Renyi ``G`` plus each non-edge added to ``E'`` with ``p_extra``."""
    if n < 1:
        raise InvalidParameter("random dual graph needs n >= 1")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        eg, egp = set(), set()
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < p_edge:
                    eg.add((u, v))
                    egp.add((u, v))
                elif rng.random() < p_extra:
                    egp.add((u, v))
        g = DualGraph(n, frozenset(eg), frozenset(egp))
        if not connected or len(components(g.adj_g)) == 1:
            return g
    raise GenerationFailed(f"no connected random dual graph after {max_tries} tries")


def restrict_to_power(g: DualGraph, r: int) -> DualGraph:
    """Drop every unreliable link longer than ``r`` hops in ``G``."""
    keep = power_graph(g, r)
    return DualGraph(g.n, g.edges_g, frozenset(e for e in g.edges_gp if e in keep),
                     positions=g.positions, labels=g.labels)


# -- validators ----------------------------------------------------------

def power_graph(g: DualGraph, r: int) -> frozenset[Edge]:
    if r < 1:
        raise InvalidParameter("power graph needs r >= 1")
    out = set()
    for u in range(g.n):
        for v, d in g.dist_g[u].items():
            if u < v and d <= r:
                out.add((u, v))
    return frozenset(out)


def is_r_restricted(g: DualGraph, r: int) -> bool:
    for u, v in g.edges_gp:
        d = g.dist_g[u].get(v)
        if d is None or d > r:
            return False
    return True


def verify_grey_zone(g: DualGraph, c: float) -> bool:
    if g.positions is None:
        raise PreconditionViolation("grey-zone check needs vertex positions")
    pos = g.positions
    for u in range(g.n):
        for v in range(u + 1, g.n):
            d = _dist(pos[u], pos[v])
            in_g = (u, v) in g.edges_g
            if (d <= 1.0) != in_g:
                return False
            if (u, v) in g.edges_gp and d > c:
                return False
    return True


def sphere_pack_limit(d: float) -> int:
    """Upper bound on points with pairwise distance > 1 inside a radius-``d`` disk.

    Radius-1/2 disks around such points are disjoint and lie within the
    radius ``d + 1/2`` disk, so area gives at most ``(2d + 1)^2`` of them.
    """
    if d < 0:
        raise InvalidParameter("radius must be nonnegative")
    return math.ceil((2 * d + 1) ** 2)
