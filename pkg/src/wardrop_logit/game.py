"""Heterogeneous routing games: populations, delays, flows and costs.

Route flow states are plain arrays of shape ``(P, R)``: row ``p`` holds the
route flows of population ``p`` in :class:`~wardrop_logit.graph.RouteSet`
order.  Edge flows and route costs are derived from them on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .errors import DimensionMismatch, GameError, NegativeFlow, NotAdmissible, NotSimple
from .graph import (
    DEFAULT_ROUTE_CAP,
    RoutingMultigraph,
    enumerate_routes,
    find_shared_edge,
    incidence_matrix,
    is_parallel,
)

NEGATIVE_FLOW_SLACK = 1e-9
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class DelayPolynomial:
    """``d(x) = sum_k coefficients[k] * x**k`` with non-negative coefficients."""

    coefficients: tuple

    def __post_init__(self):
        coefs = tuple(float(a) for a in self.coefficients)
        if not coefs:
            raise GameError("a delay polynomial needs at least one coefficient")
        if not all(math.isfinite(a) for a in coefs):
            raise GameError(f"non-finite delay coefficient in {coefs}")
        if any(a < 0 for a in coefs):
            raise GameError(f"delay coefficients must be non-negative, got {coefs}")
        object.__setattr__(self, "coefficients", coefs)

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    def __add__(self, other: "DelayPolynomial") -> "DelayPolynomial":
        a, b = self.coefficients, other.coefficients
        n = max(len(a), len(b))
        a = a + (0.0,) * (n - len(a))
        b = b + (0.0,) * (n - len(b))
        return DelayPolynomial(tuple(x + y for x, y in zip(a, b)))

    def derivative(self) -> "DelayPolynomial":
        if len(self.coefficients) == 1:
            return DelayPolynomial((0.0,))
        return DelayPolynomial(tuple(k * a for k, a in enumerate(self.coefficients) if k))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def strictly_increasing(self) -> bool:
        return any(a > 0 for a in self.coefficients[1:])

    def to_list(self) -> list:
        return list(self.coefficients)


def _as_delay(value) -> DelayPolynomial:
    if isinstance(value, DelayPolynomial):
        return value
    return DelayPolynomial(tuple(value))


@dataclass(frozen=True)
class Population:
    id: str
    throughput: float
    delays: Mapping[str, DelayPolynomial]

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        tau = float(self.throughput)
        if not math.isfinite(tau) or tau < 0:
            raise GameError(f"population {self.id!r}: throughput must be finite and >= 0")
        object.__setattr__(self, "throughput", tau)
        object.__setattr__(
            self, "delays", {str(e): _as_delay(d) for e, d in dict(self.delays).items()}
        )

    @property
    def strictly_increasing(self) -> bool:
        return all(d.strictly_increasing for d in self.delays.values())


@dataclass(frozen=True, eq=False)
class RoutingGame:
    """A multigraph shared by populations with their own delay functions.

    Delays are evaluated at aggregate edge flows only.  Route enumeration
    and the incidence matrix are computed once at construction.
    """

    graph: RoutingMultigraph
    populations: tuple
    route_cap: int = DEFAULT_ROUTE_CAP
    routes: object = field(init=False, repr=False)
    A: np.ndarray = field(init=False, repr=False)
    tau: np.ndarray = field(init=False, repr=False)
    _coef: np.ndarray = field(init=False, repr=False)
    _slope_coef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pops = tuple(self.populations)
        object.__setattr__(self, "populations", pops)
        if not pops:
            raise GameError("a game needs at least one population")
        ids = [p.id for p in pops]
        if len(set(ids)) != len(ids):
            raise GameError(f"duplicate population ids in {ids}")
        edge_ids = self.graph.edge_ids
        for p in pops:
            missing = [e for e in edge_ids if e not in p.delays]
            extra = [e for e in p.delays if e not in self.graph._index]
            if missing:
                raise GameError(f"population {p.id!r} has no delay for edges {missing}")
            if extra:
                raise GameError(f"population {p.id!r} has delays for unknown edges {extra}")

        routes = enumerate_routes(self.graph, self.route_cap)
        object.__setattr__(self, "routes", routes)
        object.__setattr__(self, "A", incidence_matrix(self.graph, routes))
        object.__setattr__(self, "tau", np.array([p.throughput for p in pops]))

        K = max(p.delays[e].degree for p in pops for e in edge_ids) + 1
        coef = np.zeros((len(pops), len(edge_ids), K))
        for i, p in enumerate(pops):
            for j, e in enumerate(edge_ids):
                c = p.delays[e].coefficients
                coef[i, j, : len(c)] = c
        slope = coef[..., 1:] * np.arange(1, K) if K > 1 else np.zeros_like(coef)
        object.__setattr__(self, "_coef", coef)
        object.__setattr__(self, "_slope_coef", slope)

    @property
    def P(self) -> int:
        return len(self.populations)

    @property
    def R(self) -> int:
        return len(self.routes)

    @property
    def E(self) -> int:
        return len(self.graph.edges)

    @property
    def total_throughput(self) -> float:
        return float(self.tau.sum())

    @property
    def population_ids(self) -> tuple:
        return tuple(p.id for p in self.populations)

    @property
    def strictly_increasing(self) -> bool:
        return all(p.strictly_increasing for p in self.populations)

    def population_index(self, pid) -> int:
        return self.population_ids.index(str(pid))

    def edge_delays(self, f) -> np.ndarray:
        """Delays ``d[p, e]`` at aggregate edge flows ``f`` (batch axes allowed)."""
        return _horner(self._coef, np.asarray(f, dtype=float))

    def edge_delay_slopes(self, f) -> np.ndarray:
        return _horner(self._slope_coef, np.asarray(f, dtype=float))

    def costs_at_edge_flows(self, f) -> np.ndarray:
        """Route costs ``c[p, r]`` given aggregate edge flows (batch axes allowed)."""
        return self.edge_delays(f) @ self.A

    def restrict(self, subgraph: RoutingMultigraph) -> "RoutingGame":
        """The same populations, keeping only the delays of ``subgraph``'s edges."""
        pops = [
            Population(p.id, p.throughput, {e: p.delays[e] for e in subgraph.edge_ids})
            for p in self.populations
        ]
        return RoutingGame(subgraph, pops, self.route_cap)

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "populations": [
                {
                    "id": p.id,
                    "throughput": p.throughput,
                    "delays": {e: p.delays[e].to_list() for e in self.graph.edge_ids},
                }
                for p in self.populations
            ],
        }


def _horner(coef, f):
    # coef: (P, E, K); f: (..., E) -> (..., P, E)
    f = f[..., None, :]
    out = np.broadcast_to(coef[..., -1], f.shape[:-2] + coef.shape[:2]).copy()
    for k in range(coef.shape[-1] - 2, -1, -1):
        out *= f
        out += coef[..., k]
    return out


def check_state(game: RoutingGame, z) -> np.ndarray:
    """Validate a ``(P, R)`` route flow array, clamping rounding-level negatives."""
    z = np.asarray(z, dtype=float)
    if z.shape != (game.P, game.R):
        raise DimensionMismatch(f"expected route flows of shape {(game.P, game.R)}, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise GameError("route flows must be finite")
    if np.any(z < -NEGATIVE_FLOW_SLACK):
        raise NegativeFlow(f"route flow {z.min():.3g} is below -{NEGATIVE_FLOW_SLACK}")
    return np.maximum(z, 0.0)


def aggregate_flows(game: RoutingGame, z) -> tuple:
    """Per-population edge flows ``(P, E)`` and aggregate edge flows ``(E,)``."""
    z = check_state(game, z)
    fp = z @ game.A.T
    return fp, fp.sum(axis=0)


def route_costs(game: RoutingGame, z) -> np.ndarray:
    """Route costs ``c[p, r]``, each the sum of population ``p``'s edge delays."""
    _, f = aggregate_flows(game, z)
    return game.costs_at_edge_flows(f)


def is_admissible(game: RoutingGame, z, tol: float = DEFAULT_TOL) -> bool:
    z = np.asarray(z, dtype=float)
    if z.shape != (game.P, game.R) or np.any(z < -NEGATIVE_FLOW_SLACK):
        return False
    return bool(np.all(np.abs(z.sum(axis=1) - game.tau) <= tol * np.maximum(1.0, game.tau)))


class Violation(NamedTuple):
    population: str
    route: int
    excess: float


class WardropReport(NamedTuple):
    residual: float
    violations: tuple
    tol: float

    @property
    def is_equilibrium(self) -> bool:
        return self.residual <= self.tol


def wardrop_residual(game: RoutingGame, z, tol: float = DEFAULT_TOL) -> WardropReport:
    """Largest excess cost over the cheapest route among routes actually used.

    A route counts as used when it carries more than ``tol`` flow.  The
    residual is 0 exactly at a Wardrop equilibrium.
    """
    if not is_admissible(game, z, tol):
        raise NotAdmissible("route flows do not satisfy the throughput constraints")
    z = check_state(game, z)
    c = route_costs(game, z)
    excess = c - c.min(axis=1, keepdims=True)
    used = z > tol
    residual = float(excess[used].max()) if used.any() else 0.0
    violations = tuple(
        Violation(game.populations[p].id, int(r), float(excess[p, r]))
        for p, r in zip(*np.nonzero(used & (excess > tol)))
    )
    return WardropReport(residual, violations, tol)


def optimal_route_set(game: RoutingGame, z, population, tie_tol: float = DEFAULT_TOL) -> frozenset:
    """Routes whose cost for ``population`` is within ``tie_tol`` of the minimum."""
    c = route_costs(game, z)[game.population_index(population)]
    return frozenset(int(r) for r in np.flatnonzero(c <= c.min() + tie_tol))


def uniform_state(game: RoutingGame) -> np.ndarray:
    return np.repeat(game.tau[:, None] / game.R, game.R, axis=1)


def random_state(game: RoutingGame, seed_or_rng) -> np.ndarray:
    """Admissible state with per-population route weights drawn uniformly."""
    rng = np.random.default_rng(seed_or_rng)
    w = rng.random((game.P, game.R))
    return game.tau[:, None] * w / w.sum(axis=1, keepdims=True)


def collapse_to_parallel(game: RoutingGame) -> RoutingGame:
    """Replace each route of a simple game by one origin-destination edge.

    The new edge carries the route's summed delay polynomial, so route
    costs are unchanged.  Collapsed edge ids join the route's edge ids
    with ``+``; single-edge routes keep their id.
    """
    g = game.graph
    if is_parallel(g):
        return game
    witness = find_shared_edge(g, game.routes)
    if witness is not None:
        raise NotSimple(f"edge {witness[0]!r} lies on more than one route", witness)
    ids = ["+".join(route) for route in game.routes]
    graph = RoutingMultigraph(
        (g.origin, g.destination), [(i, g.origin, g.destination) for i in ids], g.origin, g.destination
    )
    pops = []
    for p in game.populations:
        delays = {}
        for i, route in zip(ids, game.routes):
            total = p.delays[route[0]]
            for e in route[1:]:
                total = total + p.delays[e]
            delays[i] = total
        pops.append(Population(p.id, p.throughput, delays))
    return RoutingGame(graph, pops, game.route_cap)


def as_parallel(game: RoutingGame) -> RoutingGame:
    """``game`` itself when already parallel, otherwise its collapsed form."""
    return game if is_parallel(game.graph) else collapse_to_parallel(game)

