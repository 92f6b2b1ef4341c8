"""Deterministic logit dynamics and its contraction properties.

Two vector fields are provided:

* the route field, on per-population route flows ``z`` of shape ``(P, R)``,
  valid on any graph;
* the aggregate field, on aggregate flows of a simple game in parallel form,
  which is autonomous and l1-contracting at rate 1.

Both are integrated with classical fixed-step RK4.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractionViolated, NonFinite, NotAdmissible, StepRejected
from .game import RoutingGame, as_parallel, check_state, is_admissible

log = logging.getLogger(__name__)

# exp() of shifted exponents below this is treated as exactly zero mass
UNDERFLOW_EXPONENT = -700.0
REST_TOL = 1e-9
REST_STEPS = 10


@dataclass(frozen=True)
class LogitParams:
    eta: float = 1.0
    step: float = 0.01
    horizon: float = 50.0

    def __post_init__(self):
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise ValueError(f"eta must be finite and >= 0, got {self.eta}")
        if not (math.isfinite(self.step) and self.step > 0):
            raise ValueError(f"step must be > 0, got {self.step}")
        if not (math.isfinite(self.horizon) and self.horizon >= self.step):
            raise ValueError(f"horizon must be >= step, got {self.horizon}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


def _softmax_neg(costs, eta):
    x = -eta * (costs - costs.min(axis=-1, keepdims=True))
    w = np.exp(np.maximum(x, UNDERFLOW_EXPONENT))
    w[x < UNDERFLOW_EXPONENT] = 0.0
    return w / w.sum(axis=-1, keepdims=True)


def logit_choice(costs, eta: float, tau=1.0) -> np.ndarray:
    """Split throughput ``tau`` over routes with weights ``exp(-eta * cost)``.

    ``costs`` may be a vector of ``R`` costs or a ``(P, R)`` matrix, in which
    case ``tau`` holds one throughput per row.  The minimum cost is
    subtracted before exponentiating, so large ``eta`` never overflows.
    """
    c = np.asarray(costs, dtype=float)
    if not np.all(np.isfinite(c)):
        raise NonFinite("route costs must be finite")
    if not eta >= 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    tau = np.asarray(tau, dtype=float)
    return tau[..., None] * _softmax_neg(c, eta)


def _route_field(game, z, eta):
    f = z.sum(axis=0) @ game.A.T
    c = game.costs_at_edge_flows(f)
    return game.tau[:, None] * _softmax_neg(c, eta) - z


def _aggregate_field(pgame, f, eta):
    s = _softmax_neg(pgame.edge_delays(f), eta)
    return pgame.tau @ s - f


def rhs_route(game: RoutingGame, z, eta: float) -> np.ndarray:
    """Time derivative of per-population route flows on any graph."""
    z = check_state(game, z)
    c = game.costs_at_edge_flows(z.sum(axis=0) @ game.A.T)
    return logit_choice(c, eta, game.tau) - z


def rhs_aggregate_simple(game: RoutingGame, f, eta: float) -> np.ndarray:
    """Time derivative of aggregate route flows of a simple game.

    ``f`` is indexed by the routes of ``game`` (the edges of its parallel
    form).  Raises :class:`NotSimple` on graphs whose routes share edges.
    """
    pgame = as_parallel(game)
    f = np.asarray(f, dtype=float)
    if f.shape != (pgame.E,):
        raise ValueError(f"expected {pgame.E} aggregate flows, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise NonFinite("aggregate flows must be finite")
    return _aggregate_field(pgame, f, eta)


def jacobian_aggregate(game: RoutingGame, f, eta: float) -> np.ndarray:
    """Analytic Jacobian of :func:`rhs_aggregate_simple` at ``f``."""
    pgame = as_parallel(game)
    f = np.asarray(f, dtype=float)
    s = _softmax_neg(pgame.edge_delays(f), eta)
    W = pgame.tau[:, None] * pgame.edge_delay_slopes(f) * s
    return -eta * (np.diag(W.sum(axis=0)) - s.T @ W) - np.eye(pgame.E)


def jacobian_aggregate_fd(game: RoutingGame, f, eta: float, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of the aggregate field."""
    pgame = as_parallel(game)
    f = np.asarray(f, dtype=float)
    J = np.empty((pgame.E, pgame.E))
    for j in range(pgame.E):
        step = np.zeros(pgame.E)
        step[j] = h
        J[:, j] = (_aggregate_field(pgame, f + step, eta) - _aggregate_field(pgame, f - step, eta)) / (2 * h)
    return J


@dataclass(frozen=True)
class ContractionCertificate:
    metzler_ok: bool
    min_offdiag: float
    column_sums: np.ndarray
    max_column_sum_error: float
    n_points: int

    def holds(self, tol: float = 1e-8) -> bool:
        return self.metzler_ok and self.max_column_sum_error <= tol


def _sample_points(pgame, n_random, seed, grid_limit=729):
    tau = pgame.total_throughput
    pts = []
    if 3**pgame.E <= grid_limit:
        levels = np.array([0.0, tau / 2, tau])
        mesh = np.meshgrid(*([levels] * pgame.E), indexing="ij")
        pts.append(np.stack([m.ravel() for m in mesh], axis=1))
    rng = np.random.default_rng(seed)
    pts.append(rng.uniform(0.0, tau, size=(n_random, pgame.E)))
    return np.concatenate(pts)


def contraction_certificate(
    game: RoutingGame, eta: float, sample_points=100, seed: int = 0, metzler_tol: float = 1e-10
) -> ContractionCertificate:
    """Check the aggregate Jacobian is Metzler with columns summing to -1.

    ``sample_points`` is either an array of aggregate states or a count of
    uniform random states in the box ``[0, tau]^E``; with a count, a
    three-level grid over the box is added when it is small enough.
    """
    pgame = as_parallel(game)
    if np.ndim(sample_points) == 0:
        pts = _sample_points(pgame, int(sample_points), seed)
    else:
        pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    min_off = math.inf
    sums = np.empty((len(pts), pgame.E))
    off = ~np.eye(pgame.E, dtype=bool)
    for k, f in enumerate(pts):
        J = jacobian_aggregate(pgame, f, eta)
        if pgame.E > 1:
            min_off = min(min_off, float(J[off].min()))
        sums[k] = J.sum(axis=0)
    err = float(np.abs(sums + 1.0).max()) if len(pts) else 0.0
    return ContractionCertificate(min_off >= -metzler_tol, min_off, sums, err, len(pts))


@dataclass(frozen=True)
class Trajectory:
    """States sampled every ``step`` from ``t = 0``.

    ``kind`` is ``"route"`` for ``(N, P, R)`` route-flow states or
    ``"aggregate"`` for ``(N, E)`` aggregate flows of a parallel game.
    """

    times: np.ndarray
    states: np.ndarray
    kind: str
    converged: bool
    rhs_norm: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.times)


def integrate(
    game: RoutingGame,
    initial,
    params: LogitParams,
    which: str = "general",
    stop_at_rest: bool = False,
    rest_tol: float = REST_TOL,
    rest_steps: int = REST_STEPS,
) -> Trajectory:
    """Classical RK4 with fixed step, recording every step.

    ``which="general"`` integrates route flows on any graph;
    ``which="aggregate"`` integrates aggregate flows of a simple game
    (``initial`` may then be route flows, which are summed over
    populations).  With ``stop_at_rest`` the integration ends once
    ``||dz/dt||_1 < rest_tol`` for ``rest_steps`` consecutive steps.
    """
    eta, h = params.eta, params.step
    if which == "general":
        x = check_state(game, initial)
        field = lambda y: _route_field(game, y, eta)  # noqa: E731
        kind = "route"
    elif which in ("aggregate", "simple-aggregate"):
        pgame = as_parallel(game)
        x = np.asarray(initial, dtype=float)
        if x.ndim == 2:
            x = check_state(pgame, x).sum(axis=0)
        if x.shape != (pgame.E,):
            raise ValueError(f"expected {pgame.E} aggregate flows, got shape {x.shape}")
        field = lambda y: _aggregate_field(pgame, y, eta)  # noqa: E731
        kind = "aggregate"
    else:
        raise ValueError(f"unknown dynamics {which!r}")

    states = [x]
    k1 = field(x)
    norm = float(np.abs(k1).sum())
    rest = 0
    converged = False
    for n in range(params.n_steps):
        if stop_at_rest:
            rest = rest + 1 if norm < rest_tol else 0
            if rest >= rest_steps:
                converged = True
                break
        k2 = field(x + 0.5 * h * k1)
        k3 = field(x + 0.5 * h * k2)
        k4 = field(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise StepRejected(f"non-finite state at t={(n + 1) * h:g}")
        states.append(x)
        k1 = field(x)
        norm = float(np.abs(k1).sum())
    if not stop_at_rest:
        converged = norm < rest_tol
    elif not converged:
        log.info("no rest state reached by t=%g (|rhs|_1=%.3g)", params.horizon, norm)
    times = np.arange(len(states)) * h
    return Trajectory(times, np.array(states), kind, converged, norm)


@dataclass(frozen=True)
class ContractionReport:
    times: np.ndarray
    distances: np.ndarray
    bounds: np.ndarray

    @property
    def max_ratio(self) -> float:
        mask = self.bounds > 0
        if not mask.any():
            return 0.0
        return float((self.distances[mask] / self.bounds[mask]).max())


def contraction_pair_test(game: RoutingGame, init1, init2, params: LogitParams, slack: float = 1e-3):
    """Integrate two starts and check their aggregate flows l1-contract at rate 1.

    At every sample ``||g(t) - h(t)||_1 <= (1 + slack) ||g(0) - h(0)||_1 e^{-t}``
    must hold; otherwise :class:`ContractionViolated` names the first
    violating time.
    """
    pgame = as_parallel(game)
    for z in (init1, init2):
        if not is_admissible(pgame, z):
            raise NotAdmissible("contraction test needs admissible initial states")
    g = integrate(pgame, init1, params).states.sum(axis=1)
    hh = integrate(pgame, init2, params).states.sum(axis=1)
    times = np.arange(len(g)) * params.step
    dist = np.abs(g - hh).sum(axis=1)
    bound = (1.0 + slack) * dist[0] * np.exp(-times)
    bad = np.flatnonzero(dist > bound)
    if bad.size:
        t = float(times[bad[0]])
        raise ContractionViolated(
            f"l1 distance {dist[bad[0]]:.6g} exceeds bound {bound[bad[0]]:.6g} at t={t:g}", t
        )
    return ContractionReport(times, dist, bound)


def trajectory_header(game: RoutingGame, kind: str = "route") -> list:
    if kind == "aggregate":
        return ["t"] + [f"f[e={eid}]" for eid in as_parallel(game).graph.edge_ids]
    cols = ["t"]
    for pid in game.population_ids:
        cols += [f"z[p={pid}][r={r}]" for r in range(game.R)]
    return cols + [f"f[e={eid}]" for eid in game.graph.edge_ids]


def write_trajectory_csv(game: RoutingGame, traj: Trajectory, stream) -> None:
    """Write one row per sample: time, route flows, then aggregate edge flows."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(trajectory_header(game, traj.kind))
    for t, x in zip(traj.times, traj.states):
        if traj.kind == "aggregate":
            row = [t, *x]
        else:
            row = [t, *x.ravel(), *(x.sum(axis=0) @ game.A.T)]
        writer.writerow([repr(float(v)) for v in row])
