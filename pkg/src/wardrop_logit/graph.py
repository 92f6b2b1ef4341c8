"""Single origin-destination multigraphs, their routes and topology.

Edges are identified by string ids so that parallel edges (same tail and
head) stay distinguishable.  Everything here is immutable and pure.
"""

from __future__ import annotations

import graphlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import GraphError, NoRoute, RouteExplosion

DEFAULT_ROUTE_CAP = 100_000

Route = tuple  # ordered tuple of edge ids, origin to destination


class Edge(NamedTuple):
    id: str
    tail: str
    head: str


@dataclass(frozen=True)
class RoutingMultigraph:
    """Directed multigraph with a distinguished origin and destination.

    Every edge must lie on some origin-destination path and the graph must
    be acyclic; both are checked at construction.
    """

    nodes: tuple
    edges: tuple
    origin: str
    destination: str
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = tuple(str(n) for n in self.nodes)
        edges = tuple(Edge(*(str(x) for x in e)) for e in self.edges)
        origin, destination = str(self.origin), str(self.destination)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "destination", destination)
        object.__setattr__(self, "_index", {e.id: i for i, e in enumerate(edges)})
        self._validate()

    def _validate(self):
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise GraphError("duplicate node identifiers")
        if len(self._index) != len(self.edges):
            counts = Counter(e.id for e in self.edges)
            dup = next(k for k, c in counts.items() if c > 1)
            raise GraphError(f"duplicate edge id {dup!r}")
        for end in ("origin", "destination"):
            if getattr(self, end) not in node_set:
                raise GraphError(f"{end} {getattr(self, end)!r} is not a node")
        if self.origin == self.destination:
            raise GraphError("origin and destination must differ")
        for e in self.edges:
            for n in (e.tail, e.head):
                if n not in node_set:
                    raise GraphError(f"edge {e.id!r} references unknown node {n!r}")
            if e.tail == e.head:
                raise GraphError(f"edge {e.id!r} is a self-loop")
        if not self.edges:
            return

        forward = _reachable(self.origin, self.out_edges(), lambda e: e.head)
        backward = _reachable(self.destination, self.in_edges(), lambda e: e.tail)
        if self.destination not in forward:
            raise NoRoute(f"no path from {self.origin!r} to {self.destination!r}")
        for e in self.edges:
            if e.tail not in forward or e.head not in backward:
                raise GraphError(f"edge {e.id!r} does not lie on any origin-destination path")

        sorter = graphlib.TopologicalSorter({n: () for n in self.nodes})
        for e in self.edges:
            sorter.add(e.head, e.tail)
        try:
            tuple(sorter.static_order())
        except graphlib.CycleError as exc:
            cycle = exc.args[1]
            raise GraphError(f"graph contains a directed cycle through {cycle}") from None

    @property
    def edge_ids(self) -> tuple:
        return tuple(e.id for e in self.edges)

    def edge_index(self, edge_id: str) -> int:
        return self._index[edge_id]

    def edge(self, edge_id: str) -> Edge:
        return self.edges[self._index[edge_id]]

    def out_edges(self) -> dict:
        out = {n: [] for n in self.nodes}
        for e in self.edges:
            out[e.tail].append(e)
        return out

    def in_edges(self) -> dict:
        inc = {n: [] for n in self.nodes}
        for e in self.edges:
            inc[e.head].append(e)
        return inc

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [{"id": e.id, "tail": e.tail, "head": e.head} for e in self.edges],
            "origin": self.origin,
            "destination": self.destination,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoutingMultigraph":
        edges = [(e["id"], e["tail"], e["head"]) for e in data["edges"]]
        return cls(data["nodes"], edges, data["origin"], data["destination"])


def _reachable(start, adjacency, step):
    seen = {start}
    stack = [start]
    while stack:
        for e in adjacency[stack.pop()]:
            nxt = step(e)
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


@dataclass(frozen=True)
class RouteSet:
    """Deterministically ordered origin-destination routes of a graph."""

    routes: tuple

    def __len__(self):
        return len(self.routes)

    def __iter__(self) -> Iterator[Route]:
        return iter(self.routes)

    def __getitem__(self, i) -> Route:
        return self.routes[i]

    def index(self, route: Sequence[str]) -> int:
        return self.routes.index(tuple(route))


def enumerate_routes(g: RoutingMultigraph, cap: int = DEFAULT_ROUTE_CAP) -> RouteSet:
    """All simple directed origin-destination paths of ``g``.

    Routes are ordered lexicographically by the declaration positions of
    their edges, so ``e1 < e2 < ... < e10`` regardless of how ids sort as
    strings.
    """
    out = g.out_edges()
    routes = []
    path = []
    visited = {g.origin}

    def walk(node):
        if node == g.destination:
            routes.append(tuple(path))
            if len(routes) > cap:
                raise RouteExplosion(f"more than {cap} routes")
            return
        for e in out[node]:
            if e.head in visited:
                continue
            visited.add(e.head)
            path.append(e.id)
            walk(e.head)
            path.pop()
            visited.discard(e.head)

    walk(g.origin)
    if not routes:
        raise NoRoute(f"no path from {g.origin!r} to {g.destination!r}")
    routes.sort(key=lambda r: [g.edge_index(e) for e in r])
    return RouteSet(tuple(routes))


def incidence_matrix(g: RoutingMultigraph, rs: RouteSet) -> np.ndarray:
    """Edge-route matrix with ``A[e, r] = 1`` iff edge ``e`` is on route ``r``."""
    A = np.zeros((len(g.edges), len(rs)))
    for r, route in enumerate(rs):
        for e in route:
            A[g.edge_index(e), r] = 1.0
    return A


def find_shared_edge(g: RoutingMultigraph, rs: RouteSet | None = None):
    """Return ``(edge_id, route_a, route_b)`` for an edge used by two routes, else None."""
    rs = enumerate_routes(g) if rs is None else rs
    first_seen = {}
    for route in rs:
        for e in route:
            if e in first_seen:
                return e, first_seen[e], route
            first_seen[e] = route
    return None


def is_simple(g: RoutingMultigraph) -> bool:
    """True when every edge belongs to at most one route (routes are parallel).

    Use :func:`find_shared_edge` to obtain a witness when this is False.
    """
    return find_shared_edge(g) is None


def is_parallel(g: RoutingMultigraph) -> bool:
    """True when every edge goes straight from origin to destination."""
    return all(e.tail == g.origin and e.head == g.destination for e in g.edges)


def cut_vertices(g: RoutingMultigraph, rs: RouteSet | None = None) -> list:
    """Intermediate nodes crossed by every route, in route order."""
    rs = enumerate_routes(g) if rs is None else rs
    node_paths = [_route_nodes(g, r) for r in rs]
    common = set(node_paths[0]).intersection(*node_paths[1:])
    common -= {g.origin, g.destination}
    return [n for n in node_paths[0] if n in common]


def _route_nodes(g, route):
    nodes = [g.origin]
    for e in route:
        nodes.append(g.edge(e).head)
    return nodes


def series_decompose(g: RoutingMultigraph) -> list:
    """Split ``g`` at its cut vertices into a maximal series composition.

    The k-th component runs from the (k-1)-th cut vertex to the k-th one;
    its edges are exactly the route segments between them.
    """
    rs = enumerate_routes(g)
    cuts = cut_vertices(g, rs)
    if not cuts:
        return [g]
    stops = [g.origin, *cuts, g.destination]
    segment_edges = [set() for _ in range(len(stops) - 1)]
    for route in rs:
        for k, segment in enumerate(_split_route(g, route, cuts)):
            segment_edges[k].update(segment)

    parts = []
    for k, edge_set in enumerate(segment_edges):
        edges = [e for e in g.edges if e.id in edge_set]
        touched = {stops[k], stops[k + 1]}
        for e in edges:
            touched.update((e.tail, e.head))
        nodes = [n for n in g.nodes if n in touched]
        parts.append(RoutingMultigraph(nodes, edges, stops[k], stops[k + 1]))
    return parts


def _split_route(g, route, cuts):
    segments = [[]]
    remaining = list(cuts)
    for e in route:
        segments[-1].append(e)
        if remaining and g.edge(e).head == remaining[0]:
            remaining.pop(0)
            segments.append([])
    return [tuple(s) for s in segments]


def is_series_of_simple(g: RoutingMultigraph) -> bool:
    return all(is_simple(part) for part in series_decompose(g))


def route_factors(g: RoutingMultigraph, parts: Sequence[RoutingMultigraph]) -> np.ndarray:
    """Map each route of ``g`` to its component routes.

    Returns an int array of shape ``(R, len(parts))`` whose row ``r`` holds,
    for every component, the index of the segment of route ``r`` inside that
    component's route set.
    """
    rs = enumerate_routes(g)
    cuts = [p.destination for p in parts[:-1]]
    part_routes = [enumerate_routes(p) for p in parts]
    out = np.empty((len(rs), len(parts)), dtype=int)
    for r, route in enumerate(rs):
        for k, segment in enumerate(_split_route(g, route, cuts)):
            out[r, k] = part_routes[k].index(segment)
    return out


def series_compose(g1: RoutingMultigraph, g2: RoutingMultigraph) -> RoutingMultigraph:
    """Join ``g1`` and ``g2`` at ``g1.destination == g2.origin``."""
    if g1.destination != g2.origin:
        raise GraphError("destination of the first graph must be the origin of the second")
    shared = set(g1.nodes) & set(g2.nodes)
    if shared != {g1.destination}:
        raise GraphError(f"graphs share more than the junction node: {sorted(shared)}")
    clash = set(g1.edge_ids) & set(g2.edge_ids)
    if clash:
        raise GraphError(f"edge ids used in both graphs: {sorted(clash)}")
    nodes = list(g1.nodes) + [n for n in g2.nodes if n != g2.origin]
    return RoutingMultigraph(nodes, g1.edges + g2.edges, g1.origin, g2.destination)
