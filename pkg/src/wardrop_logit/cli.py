"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 a fixed point was not reached
within the horizon, 3 (``check-graph`` only) the convergence theorem does
not apply to the graph.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import os
import sys

from .dynamics import contraction_certificate, integrate, write_trajectory_csv
from .equilibrium import (
    DEFAULT_ETAS,
    cluster_fixed_points,
    eta_sweep,
    limit_equilibrium,
    max_pairwise_distance,
    solve_many,
    wardrop_bruteforce,
)
from .errors import NotSimple, WardropLogitError
from .graph import find_shared_edge, series_decompose
from .scenario import InitialCondition, load_scenario

log = logging.getLogger("wardrop_logit")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_NOT_APPLICABLE = 0, 1, 2, 3
UNIQUE_TOL = 1e-6


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="")


def _scenario(args):
    scenario = load_scenario(args.scenario)
    init = InitialCondition.parse(args.init) if args.init else None
    return scenario.with_overrides(args.eta, args.step, args.horizon, init)


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else x


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    traj = integrate(sc.game, sc.initial_state(), sc.params, stop_at_rest=True)
    with _open_out(args.out) as fh:
        write_trajectory_csv(sc.game, traj, fh)
    if not traj.converged:
        log.warning("trajectory did not come to rest by t=%g", sc.params.horizon)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_solve(args) -> int:
    sc = _scenario(args)
    starts = [sc.initial_state(k) for k in range(args.starts)]
    reports = solve_many(sc.game, sc.params, starts, jobs=args.jobs)
    spread = max_pairwise_distance(reports)
    clusters = cluster_fixed_points(reports)
    doc = {
        "scenario": sc.name,
        "eta": sc.params.eta,
        "verdict": "unique" if spread <= UNIQUE_TOL else "multiple",
        "max_pairwise_distance": spread,
        "clusters": clusters,
        "reports": [r.to_dict(sc.game) for r in reports],
    }
    for r in doc["reports"]:
        r["wardrop_distance"] = _finite_or_none(r["wardrop_distance"])
    with _open_out(args.out) as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return EXIT_OK if all(r.converged for r in reports) else EXIT_NOT_CONVERGED


def cmd_sweep_eta(args) -> int:
    sc = _scenario(args)
    etas = [float(x) for x in args.etas.split(",")] if args.etas else list(DEFAULT_ETAS)
    oracle = wardrop_bruteforce(sc.game, args.grid_step)
    initial = sc.initial_state()
    try:
        reports = limit_equilibrium(sc.game, etas, sc.params, initial, oracle, jobs=args.jobs).reports
    except NotSimple:
        log.warning("graph is not a series of simple graphs; fixed points may depend on the start")
        reports = eta_sweep(sc.game, etas, sc.params, initial, oracle, jobs=args.jobs)
    with _open_out(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["eta", "wardrop_distance", "residual"])
        for r in reports:
            writer.writerow([repr(r.eta), repr(r.wardrop_distance), repr(r.residual)])
    return EXIT_OK if all(r.converged for r in reports) else EXIT_NOT_CONVERGED


def cmd_check_graph(args) -> int:
    sc = _scenario(args)
    g = sc.game.graph
    parts = series_decompose(g)
    lines = []
    witnesses = [find_shared_edge(p) for p in parts]
    applies = all(w is None for w in witnesses)
    if len(parts) == 1 and applies:
        lines.append("classification: simple")
    elif applies:
        lines.append(f"classification: series-of-simple ({len(parts)} components)")
        for k, p in enumerate(parts):
            lines.append(f"  component {k}: {p.origin} -> {p.destination} edges {','.join(p.edge_ids)}")
    else:
        e, r1, r2 = next(w for w in witnesses if w is not None)
        lines.append("classification: neither")
        lines.append(f"  witness: edge {e} on routes ({','.join(r1)}) and ({','.join(r2)})")
    lines.append(f"theorem applies: {'yes' if applies else 'no'}")
    if applies:
        for k, p in enumerate(parts):
            cert = contraction_certificate(sc.game.restrict(p), sc.params.eta)
            lines.append(
                f"certificate component {k} (eta={sc.params.eta:g}): metzler={cert.metzler_ok} "
                f"min_offdiag={cert.min_offdiag:.3e} max_column_sum_error={cert.max_column_sum_error:.3e}"
            )
    with _open_out(args.out) as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK if applies else EXIT_NOT_APPLICABLE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario JSON path or builtin:<name>")
    common.add_argument("--eta", type=float, help="inverse noise level")
    common.add_argument("--step", type=float, help="RK4 step")
    common.add_argument("--horizon", type=float, help="integration end time")
    common.add_argument("--init", help="uniform | seeded-random:SEED | file:PATH")
    common.add_argument("--out", default="-", help="output file (default stdout)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")

    parser = argparse.ArgumentParser(prog="wardrop-logit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="write a trajectory CSV")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("solve", parents=[common], help="multi-start fixed points as JSON")
    p.add_argument("--starts", type=int, default=5)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("sweep-eta", parents=[common], help="distance to the Wardrop set versus eta")
    p.add_argument("--etas", help="comma-separated, non-decreasing")
    p.add_argument("--grid-step", type=float, help="oracle grid step (default tau/20)")
    p.set_defaults(func=cmd_sweep_eta)
    p = sub.add_parser("check-graph", parents=[common], help="classify the graph topology")
    p.set_defaults(func=cmd_check_graph)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("WARDROP_LOGIT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (WardropLogitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
