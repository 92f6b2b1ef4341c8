"""Fixed points of the logit dynamics and their relation to Wardrop equilibria."""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dynamics import LogitParams, integrate
from .errors import NotSimple, ThroughputMismatch, TooLarge
from .game import DEFAULT_TOL, RoutingGame, check_state, uniform_state, wardrop_residual
from .graph import find_shared_edge, route_factors, series_decompose

DEFAULT_ETAS = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)
ORACLE_CAP = 10**7
ORACLE_DIVISIONS = 20
MONOTONE_SLACK = 1e-3

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EquilibriumReport:
    fixed_point: np.ndarray
    edge_flows: np.ndarray
    eta: float
    converged: bool
    residual: float
    wardrop_distance: float | None
    steps: int
    rhs_norm: float

    def to_dict(self, game: RoutingGame) -> dict:
        return {
            "eta": self.eta,
            "converged": self.converged,
            "residual": self.residual,
            "wardrop_distance": self.wardrop_distance,
            "steps": self.steps,
            "rhs_norm": self.rhs_norm,
            "flows": {
                pid: {str(r): float(v) for r, v in enumerate(row)}
                for pid, row in zip(game.population_ids, self.fixed_point)
            },
            "edge_flows": {
                eid: float(v) for eid, v in zip(game.graph.edge_ids, self.edge_flows)
            },
        }


def edge_flows_of(game: RoutingGame, z) -> np.ndarray:
    return np.asarray(z, dtype=float).sum(axis=-2) @ game.A.T


def wardrop_distance(game: RoutingGame, z, oracle) -> float:
    """l1 distance between the aggregate edge flows of ``z`` and the closest oracle point.

    ``oracle`` is a list of route-flow equilibria or an ``(M, E)`` array of
    their aggregate edge flows.
    """
    targets = _oracle_edge_flows(game, oracle)
    if len(targets) == 0:
        return math.inf
    return float(np.abs(targets - edge_flows_of(game, z)).sum(axis=1).min())


def _oracle_edge_flows(game, oracle):
    arr = np.asarray(oracle, dtype=float)
    if arr.ndim == 3:
        return edge_flows_of(game, arr)
    return arr.reshape(-1, game.E)


def solve_fixed_point(game: RoutingGame, params: LogitParams, initial, oracle=None) -> EquilibriumReport:
    """Integrate the route dynamics from ``initial`` until it comes to rest.

    When the horizon is reached first the last state is returned with
    ``converged=False``.
    """
    traj = integrate(game, initial, params, stop_at_rest=True)
    z = check_state(game, traj.final)
    res = wardrop_residual(game, z).residual
    dist = None if oracle is None else wardrop_distance(game, z, oracle)
    return EquilibriumReport(
        z, edge_flows_of(game, z), params.eta, traj.converged, res, dist, len(traj) - 1, traj.rhs_norm
    )


def _solve_job(args):
    return solve_fixed_point(*args)


def _run_jobs(tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [_solve_job(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve_job, tasks))


def solve_many(game: RoutingGame, params: LogitParams, starts: Sequence, oracle=None, jobs: int = 1) -> list:
    """Solve from several starts; results keep the order of ``starts``."""
    return _run_jobs([(game, params, z, oracle) for z in starts], jobs)


def cluster_fixed_points(reports: Sequence[EquilibriumReport], tol: float = 1e-3) -> list:
    """Group reports whose aggregate edge flows are within ``tol`` (l1) of a cluster seed."""
    clusters = []
    for i, rep in enumerate(reports):
        for cl in clusters:
            if np.abs(reports[cl[0]].edge_flows - rep.edge_flows).sum() <= tol:
                cl.append(i)
                break
        else:
            clusters.append([i])
    return clusters


def max_pairwise_distance(reports: Sequence[EquilibriumReport]) -> float:
    best = 0.0
    for a, b in itertools.combinations(reports, 2):
        best = max(best, float(np.abs(a.edge_flows - b.edge_flows).sum()))
    return best


def _compositions(n, parts):
    """All non-negative integer vectors of length ``parts`` summing to ``n``."""
    if parts == 1:
        return np.array([[n]])
    rows = []
    for bars in itertools.combinations(range(n + parts - 1), parts - 1):
        edges = (-1,) + bars + (n + parts - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(parts)])
    return np.array(rows)


def population_grid(tau: float, routes: int, divisions: int) -> np.ndarray:
    if tau == 0:
        return np.zeros((1, routes))
    return tau * _compositions(divisions, routes) / divisions


def wardrop_bruteforce(
    game: RoutingGame,
    grid_step: float | None = None,
    tol: float = DEFAULT_TOL,
    cap: int = ORACLE_CAP,
    chunk: int = 1 << 16,
) -> list:
    """Grid points of the admissible set that are Wardrop equilibria within ``tol``.

    Each population's throughput is split into ``round(tau / grid_step)``
    equal units (20 units when ``grid_step`` is None) and every way of
    distributing the units over the routes is tried.  A point is kept when
    no route carrying more than ``tol`` flow costs more than ``tol`` above
    the population's cheapest route.
    """
    divisions = []
    for tau in game.tau:
        if grid_step is None:
            divisions.append(ORACLE_DIVISIONS)
        else:
            divisions.append(max(1, int(round(tau / grid_step))))
    sizes = [1 if tau == 0 else math.comb(n + game.R - 1, game.R - 1) for tau, n in zip(game.tau, divisions)]
    total = math.prod(sizes)
    if total > cap:
        raise TooLarge(f"oracle grid has {total} points, above the cap of {cap}")
    grids = [population_grid(tau, game.R, n) for tau, n in zip(game.tau, divisions)]

    found = []
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, total)), sizes)
        z = np.stack([g[i] for g, i in zip(grids, idx)], axis=1)
        c = game.costs_at_edge_flows(edge_flows_of(game, z))
        excess = c - c.min(axis=-1, keepdims=True)
        worst = np.where(z > tol, excess, 0.0).max(axis=(1, 2))
        found.extend(z[worst <= tol])
    return found


def _require_series_of_simple(game):
    for part in series_decompose(game.graph):
        witness = find_shared_edge(part)
        if witness is not None:
            raise NotSimple(f"edge {witness[0]!r} lies on more than one route", witness)


def eta_sweep(
    game: RoutingGame, etas: Sequence[float], params: LogitParams, initial, oracle=None, jobs: int = 1
) -> list:
    """Fixed points for each noise level, all started from ``initial``."""
    return _run_jobs([(game, replace(params, eta=float(eta)), initial, oracle) for eta in etas], jobs)


@dataclass(frozen=True)
class LimitResult:
    state: np.ndarray
    etas: tuple
    distances: tuple
    reports: tuple
    # uniform randomization among tied routes is only established for a
    # single simple component; on series compositions it is observed, not proved
    selection_proved: bool = True

    @property
    def monotone(self) -> bool:
        d = self.distances
        return all(b <= a + MONOTONE_SLACK for a, b in zip(d, d[1:]))


def limit_equilibrium(
    game: RoutingGame,
    eta_sequence: Sequence[float] = DEFAULT_ETAS,
    params: LogitParams | None = None,
    initial=None,
    oracle=None,
    grid_step: float | None = None,
    jobs: int = 1,
) -> LimitResult:
    """Follow the unique fixed point as noise vanishes.

    Returns the fixed point at the largest ``eta`` together with the l1
    distances of every fixed point to the oracle's Wardrop set; for a
    series of simple graphs they should shrink along the sequence
    (see :attr:`LimitResult.monotone`).
    """
    _require_series_of_simple(game)
    etas = tuple(float(e) for e in eta_sequence)
    if any(b < a for a, b in zip(etas, etas[1:])):
        raise ValueError("eta_sequence must be non-decreasing")
    params = params or LogitParams()
    if initial is None:
        initial = uniform_state(game)
    if oracle is None:
        oracle = wardrop_bruteforce(game, grid_step)
    reports = eta_sweep(game, etas, params, initial, oracle, jobs)
    proved = len(series_decompose(game.graph)) == 1
    if not proved:
        log.info("uniform-randomization selection on a series composition is empirical")
    return LimitResult(
        reports[-1].fixed_point, etas, tuple(r.wardrop_distance for r in reports), tuple(reports), proved
    )


def _factor_matrices(game):
    parts = series_decompose(game.graph)
    F = route_factors(game.graph, parts)
    mats = []
    for k, part in enumerate(parts):
        M = np.zeros((game.R, int(F[:, k].max()) + 1))
        M[np.arange(game.R), F[:, k]] = 1.0
        mats.append(M)
    return parts, F, mats


def series_marginals(game: RoutingGame, z) -> list:
    """Project route flows onto each series component: ``z_i = sum_j z_ij``."""
    _, _, mats = _factor_matrices(game)
    z = np.asarray(z, dtype=float)
    return [z @ M for M in mats]


def compose_series_equilibrium(game: RoutingGame, *components, tol: float = 1e-8) -> np.ndarray:
    """Product-form route flows on a series composition.

    ``components`` are route-flow states (or reports) of the components
    returned by :func:`series_decompose`, in order.  The composed flow on
    the concatenated route ``(i, j, ...)`` is ``tau * (z_i/tau) * (z_j/tau) * ...``.
    """
    parts, F, _ = _factor_matrices(game)
    if len(components) != len(parts):
        raise ValueError(f"expected {len(parts)} component states, got {len(components)}")
    tau = game.tau
    states = []
    for k, comp in enumerate(components):
        x = np.asarray(getattr(comp, "fixed_point", comp), dtype=float)
        n_routes = int(F[:, k].max()) + 1
        if x.shape != (game.P, n_routes):
            raise ValueError(f"component {k} state must have shape {(game.P, n_routes)}, got {x.shape}")
        if np.any(np.abs(x.sum(axis=1) - tau) > tol * np.maximum(1.0, tau)):
            raise ThroughputMismatch(f"component {k} throughputs {x.sum(axis=1)} differ from {tau}")
        states.append(x)
    safe = np.where(tau > 0, tau, 1.0)[:, None]
    z = np.repeat(tau[:, None], game.R, axis=1)
    for k, x in enumerate(states):
        z = z * (x / safe)[:, F[:, k]]
    return z
