"""Link and route travel times, route time bounds and their inverse."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

from .assignment import FrontierFloor, critical_frontiers, free_flow_densities
from .errors import DomainError, UnattainableTimeError
from .fundamental import REL_TOL, Link, Route, _check_density, isclose


def link_travel_time(link: Link, x: float, realized_flow: float) -> float:
    """``L x / f``; ``L / v`` on an empty link and ``inf`` on a blocked one."""
    x = _check_density(link, x)
    if realized_flow < 0:
        raise DomainError("realised flow must be non-negative")
    if x == 0.0:
        return link.free_flow_time
    if realized_flow == 0.0:
        return math.inf
    return link.length * x / realized_flow


def route_travel_time(route: Route, densities: Sequence[float], flows) -> float:
    """Sum of link travel times.

    ``flows`` is either one realised route flow or the ``n + 1`` interface
    flows of the route, in which case each link uses its outflow.
    """
    n = len(route.links)
    if len(densities) != n:
        raise DomainError(f"expected {n} densities, got {len(densities)}")
    if isinstance(flows, (int, float)):
        outflows = [float(flows)] * n
    else:
        if len(flows) != n + 1:
            raise DomainError(f"expected {n + 1} interface flows, got {len(flows)}")
        outflows = list(flows[1:])
    return sum(link_travel_time(l, x, f) for l, x, f in zip(route.links, densities, outflows))


@dataclass(frozen=True)
class TimeInterval:
    lower: float
    upper: float
    frontier: Optional[int] = None

    def __contains__(self, t: float) -> bool:
        slack = REL_TOL * max(abs(self.upper), 1e-300)
        return self.lower - slack <= t <= self.upper + slack


@dataclass(frozen=True)
class RouteTimeBounds:
    free_flow_time: float
    max_time: float
    attainable_set: tuple[TimeInterval, ...]

    def gaps(self) -> list[tuple[float, float]]:
        out = []
        for a, b in zip(self.attainable_set, self.attainable_set[1:]):
            if b.lower > a.upper and not isclose(a.upper, b.lower):
                out.append((a.upper, b.lower))
        return out


def _frontier_base(route: Route, k: int) -> float:
    """Route time with frontier ``k`` excluding the frontier link itself."""
    b = route.bottleneck_index
    t = sum(l.free_flow_time for l in route.links[:k])
    t += sum(route.congested_time(i) for i in range(k + 1, b))
    t += sum(l.free_flow_time for l in route.links[b:])
    return t


def route_time_bounds(route: Route, frontier_floor: FrontierFloor = "flow") -> RouteTimeBounds:
    zbar = route.capacity
    tf = route.free_flow_time
    intervals = []
    for fr in reversed(critical_frontiers(route, frontier_floor)):
        base = _frontier_base(route, fr.position)
        L = route.links[fr.position].length
        intervals.append(TimeInterval(base + L * fr.lower / zbar, base + L * fr.upper / zbar, fr.position))
    if not intervals or not isclose(intervals[0].lower, tf):
        intervals.insert(0, TimeInterval(tf, tf))
    return RouteTimeBounds(tf, route.saturated_time, tuple(intervals))


def tau_inverse(
    route: Route,
    target: float,
    mode: Literal["exact", "nearest"] = "exact",
    frontier_floor: FrontierFloor = "flow",
) -> tuple[tuple[float, ...], float]:
    """Densities of a route carrying its capacity whose travel time is ``target``.

    Links upstream of the frontier stay in free flow, links between the
    frontier and the bottleneck are congested and the frontier density is
    solved in closed form. Returns ``(densities, residual)`` where ``residual``
    is the attained time minus ``target`` (zero unless ``mode="nearest"`` had
    to snap to the closest attainable time).

    Raises:
        DomainError: ``target`` outside ``[tau_F, tau_S]``.
        UnattainableTimeError: ``target`` falls between attainable intervals
            and ``mode="exact"``.
    """
    if mode not in ("exact", "nearest"):
        raise DomainError(f"unknown mode {mode!r}")
    bounds = route_time_bounds(route, frontier_floor)
    tf, ts = bounds.free_flow_time, bounds.max_time
    slack = REL_TOL * ts
    if not (tf - slack <= target <= ts + slack):
        raise DomainError(f"target {target} h outside [{tf}, {ts}] h")
    zbar = route.capacity
    frontiers = {fr.position: fr for fr in critical_frontiers(route, frontier_floor)}
    if target > tf:
        for iv in bounds.attainable_set:
            if iv.frontier is not None and target in iv:
                return _solve_frontier(route, frontiers[iv.frontier], target)
    if isclose(target, tf):
        return free_flow_densities(route, zbar), tf - target

    # target sits in a gap between two attainable intervals
    nearest = min(
        (end for iv in bounds.attainable_set for end in (iv.lower, iv.upper)),
        key=lambda t: abs(t - target),
    )
    if mode == "exact":
        raise UnattainableTimeError(target, nearest)
    for iv in bounds.attainable_set:
        if nearest in (iv.lower, iv.upper):
            if iv.frontier is None:
                return free_flow_densities(route, zbar), tf - target
            dens, _ = _solve_frontier(route, frontiers[iv.frontier], nearest)
            return dens, nearest - target
    raise AssertionError("unreachable")


def _solve_frontier(route, frontier, target):
    zbar = route.capacity
    k = frontier.position
    base = _frontier_base(route, k)
    L = route.links[k].length
    y = (target - base) * zbar / L
    y = min(max(y, frontier.lower), frontier.upper)
    attained = base + L * y / zbar
    return frontier.member(y), attained - target
