"""Selfish routing on networks of cell-transmission-model links."""

from .assignment import (
    ConsistentFamily,
    RouteClass,
    RoutingVector,
    TrafficAssignment,
    classify_routes,
    consistent_density,
    interface_flows,
    is_consistent,
    transfer_accounting,
)
from .equilibrium import (
    GameInstance,
    Undefined,
    WardropKind,
    WardropSolution,
    indices,
    is_wardrop,
    oracle_wardrop,
    price_of_anarchy,
    psi_bounds,
    route_times,
    social_optimum,
    total_cost,
    wardrop,
)
from .errors import AssumptionViolation, CTMError, DomainError, UnattainableTimeError
from .fundamental import Link, ParallelNetwork, Route, demand, supply, validate_network
from .generalnet import GeneralNetwork, search_equilibrium, steady_state, wheatstone
from .netfile import InputError, NetworkDocument, parse_network
from .traveltime import link_travel_time, route_time_bounds, route_travel_time, tau_inverse

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation",
    "CTMError",
    "ConsistentFamily",
    "DomainError",
    "GameInstance",
    "GeneralNetwork",
    "InputError",
    "Link",
    "NetworkDocument",
    "ParallelNetwork",
    "Route",
    "RouteClass",
    "RoutingVector",
    "TrafficAssignment",
    "UnattainableTimeError",
    "Undefined",
    "WardropKind",
    "WardropSolution",
    "classify_routes",
    "consistent_density",
    "demand",
    "indices",
    "interface_flows",
    "is_consistent",
    "is_wardrop",
    "link_travel_time",
    "oracle_wardrop",
    "parse_network",
    "price_of_anarchy",
    "psi_bounds",
    "route_time_bounds",
    "route_times",
    "route_travel_time",
    "search_equilibrium",
    "social_optimum",
    "steady_state",
    "supply",
    "tau_inverse",
    "total_cost",
    "transfer_accounting",
    "validate_network",
    "wardrop",
    "wheatstone",
]
