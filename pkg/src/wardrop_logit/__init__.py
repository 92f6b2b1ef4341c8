"""Logit dynamics and Wardrop equilibria in heterogeneous routing games."""

from .dynamics import (
    ContractionCertificate,
    LogitParams,
    Trajectory,
    contraction_certificate,
    contraction_pair_test,
    integrate,
    jacobian_aggregate,
    jacobian_aggregate_fd,
    logit_choice,
    rhs_aggregate_simple,
    rhs_route,
)
from .equilibrium import (
    EquilibriumReport,
    compose_series_equilibrium,
    limit_equilibrium,
    series_marginals,
    solve_fixed_point,
    wardrop_bruteforce,
    wardrop_distance,
)
from .game import (
    DelayPolynomial,
    Population,
    RoutingGame,
    aggregate_flows,
    collapse_to_parallel,
    optimal_route_set,
    route_costs,
    wardrop_residual,
)
from .graph import (
    RouteSet,
    RoutingMultigraph,
    enumerate_routes,
    incidence_matrix,
    is_series_of_simple,
    is_simple,
    series_decompose,
)
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"
