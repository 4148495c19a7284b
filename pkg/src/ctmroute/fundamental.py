"""CTM links, routes and validated parallel networks.

Units are fixed throughout the package: flows in veh/h, densities in veh/km,
speeds in km/h, lengths in km and durations in hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import AssumptionViolation, DomainError

#: Relative tolerance for structural equalities (ties, branch detection).
REL_TOL = 1e-9


def isclose(a: float, b: float, rel: float = REL_TOL) -> bool:
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


@dataclass(frozen=True)
class LinkParams:
    capacity: float
    jam_density: float
    free_speed: float
    length: float

    def __post_init__(self):
        for name in ("capacity", "jam_density", "free_speed", "length"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Link:
    """One CTM cell with a triangular fundamental diagram.

    The critical density ``capacity / free_speed`` must lie strictly below the
    jam density, otherwise the congested branch is empty and the wave speed is
    undefined.
    """

    params: LinkParams
    name: str = ""
    critical_density: float = field(init=False, repr=False)
    wave_speed: float = field(init=False, repr=False)

    def __post_init__(self):
        p = self.params
        xc = p.capacity / p.free_speed
        if xc >= p.jam_density * (1.0 - 1e-12):
            raise DomainError(
                f"link {self.name or '?'}: critical density {xc} is not below jam density "
                f"{p.jam_density}; wave speed undefined"
            )
        object.__setattr__(self, "critical_density", xc)
        object.__setattr__(self, "wave_speed", p.capacity / (p.jam_density - xc))

    @classmethod
    def make(cls, capacity, jam_density, free_speed, length, name=""):
        return cls(LinkParams(capacity, jam_density, free_speed, length), name)

    @property
    def capacity(self) -> float:
        return self.params.capacity

    @property
    def jam_density(self) -> float:
        return self.params.jam_density

    @property
    def free_speed(self) -> float:
        return self.params.free_speed

    @property
    def length(self) -> float:
        return self.params.length

    @property
    def free_flow_time(self) -> float:
        return self.params.length / self.params.free_speed

    def supply(self, x: float) -> float:
        return supply(self, x)

    def demand(self, x: float) -> float:
        return demand(self, x)


def _check_density(link: Link, x: float) -> float:
    jam = link.params.jam_density
    slack = 1e-12 * jam
    if not (-slack <= x <= jam + slack) or math.isnan(x):
        raise DomainError(f"density {x!r} outside [0, {jam}] for link {link.name or '?'}")
    return min(max(x, 0.0), jam)


def supply(link: Link, x: float) -> float:
    """Flow the link can accept at density ``x``: ``min(capacity, w (jam - x))``."""
    x = _check_density(link, x)
    return min(link.params.capacity, link.wave_speed * (link.params.jam_density - x))


def demand(link: Link, x: float) -> float:
    """Flow the link wants to discharge at density ``x``: ``min(v x, capacity)``."""
    x = _check_density(link, x)
    return min(link.params.free_speed * x, link.params.capacity)


@dataclass(frozen=True)
class Route:
    """Ordered chain of links from the origin to the destination.

    A route needs a unique minimum-capacity link (the bottleneck). Routes whose
    links all share one capacity are accepted too: no link can then be held in
    congestion, and the first link acts as bottleneck.
    """

    links: tuple[Link, ...]
    name: str = ""
    bottleneck_index: int = field(init=False)
    capacity: float = field(init=False)

    def __post_init__(self):
        links = tuple(self.links)
        if not links:
            raise DomainError("a route needs at least one link")
        object.__setattr__(self, "links", links)
        caps = [l.capacity for l in links]
        zbar = min(caps)
        at_min = [i for i, c in enumerate(caps) if isclose(c, zbar)]
        if len(at_min) > 1 and len(at_min) != len(links):
            raise AssumptionViolation(
                1,
                f"route {self.name or '?'} has {len(at_min)} links sharing the minimum "
                f"capacity {zbar} (positions {at_min})",
            )
        object.__setattr__(self, "bottleneck_index", at_min[0])
        object.__setattr__(self, "capacity", zbar)

    def __len__(self) -> int:
        return len(self.links)

    def congested_density(self, i: int) -> float:
        """Density of link ``i`` when congested while carrying the route capacity."""
        link = self.links[i]
        return link.jam_density - self.capacity / link.wave_speed

    def congested_time(self, i: int) -> float:
        return self.links[i].length * self.congested_density(i) / self.capacity

    @property
    def free_flow_time(self) -> float:
        return sum(l.free_flow_time for l in self.links)

    @property
    def saturated_time(self) -> float:
        b = self.bottleneck_index
        return sum(self.congested_time(i) for i in range(b)) + sum(
            l.free_flow_time for l in self.links[b:]
        )


def route_capacity(route: Route) -> float:
    return min(l.capacity for l in route.links)


@dataclass(frozen=True)
class ParallelNetwork:
    """Routes sharing one origin and one destination, sorted by free-flow time."""

    routes: tuple[Route, ...]

    def __post_init__(self):
        routes = tuple(self.routes)
        if not routes:
            raise DomainError("a network needs at least one route")
        object.__setattr__(self, "routes", routes)
        tf = [r.free_flow_time for r in routes]
        for a, b in zip(tf, tf[1:]):
            if isclose(a, b):
                raise AssumptionViolation(3, f"tied free-flow route times {a} h")
            if b < a:
                raise DomainError("routes must be sorted by increasing free-flow time")
        ts = [r.saturated_time for r in routes]
        for i in range(len(ts)):
            for j in range(i + 1, len(ts)):
                if isclose(ts[i], ts[j]):
                    raise AssumptionViolation(
                        3, f"routes {i + 1} and {j + 1} share saturated time {ts[i]} h"
                    )

    def __len__(self) -> int:
        return len(self.routes)

    @property
    def capacities(self) -> tuple[float, ...]:
        return tuple(r.capacity for r in self.routes)

    @property
    def min_cut(self) -> float:
        return sum(self.capacities)

    @property
    def free_flow_times(self) -> tuple[float, ...]:
        return tuple(r.free_flow_time for r in self.routes)

    @property
    def saturated_times(self) -> tuple[float, ...]:
        return tuple(r.saturated_time for r in self.routes)


def validate_network(routes: Iterable[Route]) -> ParallelNetwork:
    """Sort routes by free-flow time and check the model assumptions.

    Raises:
        AssumptionViolation: tied bottlenecks inside a route (1) or tied route
            times across routes (3).
    """
    routes = list(routes)
    if isinstance(routes[0] if routes else None, Sequence):
        routes = [Route(tuple(r)) for r in routes]
    routes.sort(key=lambda r: r.free_flow_time)
    return ParallelNetwork(tuple(routes))
