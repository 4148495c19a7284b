"""Routing vectors, route classes and consistent density vectors.

A density vector is *consistent* with a routing vector when every interface
flow along each route is the same. For a route assigned less than its
capacity that vector is unique and in free flow; for a route assigned more,
it is unique with every link upstream of the bottleneck held in congestion.
A route assigned exactly its capacity admits a one-parameter family per
"frontier" link, which is stored here by its interval endpoints.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Sequence

from .errors import DomainError
from .fundamental import REL_TOL, ParallelNetwork, Route, demand, isclose, supply

FrontierFloor = Literal["flow", "critical"]

#: Tolerance on the sum of routing ratios.
SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class RoutingVector:
    ratios: tuple[float, ...]

    def __post_init__(self):
        ratios = tuple(float(r) for r in self.ratios)
        if not ratios:
            raise DomainError("empty routing vector")
        if any(r < 0 or r != r for r in ratios):
            raise DomainError(f"routing ratios must be non-negative: {ratios}")
        if abs(sum(ratios) - 1.0) > SIMPLEX_TOL * max(1, len(ratios)):
            raise DomainError(f"routing ratios must sum to 1, got {sum(ratios)!r}")
        object.__setattr__(self, "ratios", ratios)

    @classmethod
    def from_flows(cls, flows: Sequence[float]) -> "RoutingVector":
        """Normalise non-negative route flows into ratios."""
        total = float(sum(flows))
        if total <= 0:
            raise DomainError("route flows must have a positive total")
        ratios = [f / total for f in flows]
        # push the rounding residue onto the largest entry
        i = max(range(len(ratios)), key=ratios.__getitem__)
        ratios[i] += 1.0 - sum(ratios)
        return cls(tuple(max(r, 0.0) for r in ratios))

    @classmethod
    def parse(cls, text: str) -> "RoutingVector":
        """Parse ``"0.75,0.25"`` or ``"1/3,2/3"``."""
        try:
            parts = [Fraction(s.strip()) for s in text.split(",") if s.strip()]
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"cannot parse routing ratios {text!r}: {exc}") from None
        if sum(parts) != 1 and abs(float(sum(parts)) - 1) <= 1e-9:
            parts[-1] = 1 - sum(parts[:-1])
        return cls(tuple(float(p) for p in parts))

    def __len__(self) -> int:
        return len(self.ratios)

    def __getitem__(self, i: int) -> float:
        return self.ratios[i]

    def __iter__(self):
        return iter(self.ratios)


class RouteClass(enum.Enum):
    FREE_FLOW = "F"
    CRITICAL = "C"
    SATURATED = "S"

    @property
    def label(self) -> str:
        return "P_" + self.value


def classify(flow: float, capacity: float) -> RouteClass:
    if isclose(flow, capacity, REL_TOL):
        return RouteClass.CRITICAL
    return RouteClass.FREE_FLOW if flow < capacity else RouteClass.SATURATED


def classify_routes(network: ParallelNetwork, phi: float, routing: RoutingVector) -> list[RouteClass]:
    _check_inputs(network, phi, routing)
    return [classify(phi * r, route.capacity) for route, r in zip(network.routes, routing)]


def free_flow_densities(route: Route, flow: float) -> tuple[float, ...]:
    return tuple(flow / l.free_speed for l in route.links)


def saturated_densities(route: Route) -> tuple[float, ...]:
    b = route.bottleneck_index
    return tuple(
        route.congested_density(i) if i < b else route.capacity / l.free_speed
        for i, l in enumerate(route.links)
    )


def frontier_bounds(route: Route, k: int, floor: FrontierFloor = "flow") -> tuple[float, float]:
    """Admissible density interval for frontier link ``k`` of a route at capacity.

    With ``floor="flow"`` the lower end is the density at which the link's
    demand equals the route capacity; every density in the interval keeps the
    route consistent. ``floor="critical"`` starts the interval at the critical
    density instead, which drops the members whose frontier link is below
    critical density.
    """
    link = route.links[k]
    lower = route.capacity / link.free_speed if floor == "flow" else link.critical_density
    return lower, route.congested_density(k)


@dataclass(frozen=True)
class Frontier:
    """Members of a critical route's family with the frontier at ``position``."""

    position: int
    lower: float
    upper: float
    template: tuple[float, ...]

    def member(self, density: float) -> tuple[float, ...]:
        if not (self.lower - 1e-12 * self.upper <= density <= self.upper * (1 + 1e-12)):
            raise DomainError(
                f"frontier density {density} outside [{self.lower}, {self.upper}]"
            )
        x = list(self.template)
        x[self.position] = density
        return tuple(x)


def critical_frontiers(route: Route, floor: FrontierFloor = "flow") -> tuple[Frontier, ...]:
    zbar = route.capacity
    b = route.bottleneck_index
    out = []
    for k in range(b):
        lo, hi = frontier_bounds(route, k, floor)
        template = []
        for i, link in enumerate(route.links):
            if i < k or i >= b:
                template.append(zbar / link.free_speed)
            elif i == k:
                template.append(lo)
            else:
                template.append(route.congested_density(i))
        out.append(Frontier(k, lo, hi, tuple(template)))
    return tuple(out)


@dataclass(frozen=True)
class RouteFamily:
    """Consistent densities of one route.

    ``canonical`` is the unique vector for free-flow and saturated routes and
    the all-free-flow member for a critical route. ``frontiers`` is empty
    unless the route is critical and has links upstream of its bottleneck.
    """

    route_class: RouteClass
    flow: float
    canonical: tuple[float, ...]
    frontiers: tuple[Frontier, ...] = ()

    @property
    def unique(self) -> bool:
        return not self.frontiers

    def members(self) -> list[tuple[float, ...]]:
        """The canonical vector plus both endpoints of every frontier interval."""
        out = [self.canonical]
        for fr in self.frontiers:
            out.append(fr.member(fr.lower))
            out.append(fr.member(fr.upper))
        return out


@dataclass(frozen=True)
class ConsistentFamily:
    routes: tuple[RouteFamily, ...]

    def canonical(self) -> tuple[tuple[float, ...], ...]:
        return tuple(r.canonical for r in self.routes)

    def flat(self) -> tuple[float, ...]:
        return tuple(x for r in self.routes for x in r.canonical)

    @property
    def classes(self) -> list[RouteClass]:
        return [r.route_class for r in self.routes]


def route_family(route: Route, flow: float, floor: FrontierFloor = "flow") -> RouteFamily:
    cls = classify(flow, route.capacity)
    if cls is RouteClass.FREE_FLOW:
        return RouteFamily(cls, flow, free_flow_densities(route, flow))
    if cls is RouteClass.SATURATED:
        return RouteFamily(cls, route.capacity, saturated_densities(route))
    return RouteFamily(
        cls,
        route.capacity,
        free_flow_densities(route, route.capacity),
        critical_frontiers(route, floor),
    )


def consistent_density(
    network: ParallelNetwork,
    phi: float,
    routing: RoutingVector,
    frontier_floor: FrontierFloor = "flow",
) -> ConsistentFamily:
    _check_inputs(network, phi, routing)
    return ConsistentFamily(
        tuple(route_family(route, phi * r, frontier_floor) for route, r in zip(network.routes, routing))
    )


def interface_flows(route: Route, densities: Sequence[float], nominal_inflow: float) -> list[float]:
    """Flows across the ``n + 1`` interfaces of a route.

    Entry 0 is the origin inflow ``min(nominal, s_1)``, entry ``l`` the
    exchange ``min(d_l, s_{l+1})`` and the last entry the free discharge
    ``d_n``.
    """
    links = route.links
    if len(densities) != len(links):
        raise DomainError(f"expected {len(links)} densities, got {len(densities)}")
    if nominal_inflow < 0:
        raise DomainError("nominal inflow must be non-negative")
    flows = [min(nominal_inflow, supply(links[0], densities[0]))]
    for i in range(len(links) - 1):
        flows.append(min(demand(links[i], densities[i]), supply(links[i + 1], densities[i + 1])))
    flows.append(demand(links[-1], densities[-1]))
    return flows


def route_is_consistent(route: Route, densities, nominal_inflow: float, tol: float = REL_TOL) -> bool:
    flows = interface_flows(route, densities, nominal_inflow)
    hi = max(flows)
    return hi - min(flows) <= tol * max(hi, 1e-12)


@dataclass(frozen=True)
class TrafficAssignment:
    """Routing vector plus a density vector and its realised interface flows."""

    network: ParallelNetwork
    exogenous_flow: float
    routing: RoutingVector
    densities: tuple[tuple[float, ...], ...]
    flows: tuple[tuple[float, ...], ...]

    @classmethod
    def build(cls, network, phi, routing, densities) -> "TrafficAssignment":
        _check_inputs(network, phi, routing)
        if len(densities) != len(network):
            raise DomainError("one density list per route is required")
        dens = tuple(tuple(float(x) for x in d) for d in densities)
        flows = tuple(
            tuple(interface_flows(route, d, phi * r))
            for route, d, r in zip(network.routes, dens, routing)
        )
        return cls(network, float(phi), routing, dens, flows)

    @classmethod
    def canonical(cls, network, phi, routing, frontier_floor: FrontierFloor = "flow"):
        fam = consistent_density(network, phi, routing, frontier_floor)
        return cls.build(network, phi, routing, fam.canonical())

    def route_flow(self, p: int) -> float:
        """Realised flow on route ``p`` (its origin inflow)."""
        return self.flows[p][0]

    @property
    def transferred(self) -> float:
        return sum(f[0] for f in self.flows)

    @property
    def psi(self) -> float:
        return max(self.exogenous_flow - self.transferred, 0.0)


def is_consistent(assignment: TrafficAssignment, tol: float = REL_TOL) -> bool:
    for f in assignment.flows:
        hi = max(f)
        if hi - min(f) > tol * max(hi, 1e-12):
            return False
    return True


def transfer_accounting(
    network: ParallelNetwork, phi: float, routing: RoutingVector
) -> tuple[list[float], float]:
    """Per-route transferred flow and the non-transferred remainder ``psi``."""
    transferred, psi = [], 0.0
    for route, cls, r in zip(network.routes, classify_routes(network, phi, routing), routing):
        nominal = phi * r
        if cls is RouteClass.SATURATED:
            transferred.append(route.capacity)
            psi += nominal - route.capacity
        else:
            transferred.append(nominal)
    return transferred, psi


def _check_inputs(network: ParallelNetwork, phi: float, routing: RoutingVector) -> None:
    if not phi >= 0:
        raise DomainError(f"exogenous flow must be non-negative, got {phi!r}")
    if len(routing) != len(network):
        raise DomainError(
            f"routing vector has {len(routing)} entries for {len(network)} routes"
        )
