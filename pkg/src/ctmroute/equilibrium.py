"""Wardrop equilibria, social optimum and price of anarchy on parallel networks.

Route numbering in :class:`EquilibriumIndices` is 1-based so reports line up
with the usual ``k``, ``U``, ``u``, ``j`` notation; everything else is 0-based.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .assignment import (
    FrontierFloor,
    RouteClass,
    RoutingVector,
    TrafficAssignment,
    classify,
    free_flow_densities,
    is_consistent,
    saturated_densities,
)
from .errors import AssumptionViolation, DomainError
from .fundamental import REL_TOL, ParallelNetwork, isclose
from .traveltime import route_travel_time, tau_inverse


@dataclass(frozen=True)
class GameInstance:
    network: ParallelNetwork
    exogenous_flow: float

    def __post_init__(self):
        phi = self.exogenous_flow
        if not (isinstance(phi, (int, float)) and math.isfinite(phi) and phi > 0):
            raise DomainError(f"exogenous flow must be positive and finite, got {phi!r}")
        cut = self.network.min_cut
        if phi > cut and not isclose(phi, cut):
            raise AssumptionViolation(2, f"exogenous flow {phi} exceeds min-cut capacity {cut}")


@dataclass(frozen=True)
class EquilibriumIndices:
    k: int
    U: frozenset
    u: Optional[int] = None
    j: Optional[int] = None


def indices(game: GameInstance) -> EquilibriumIndices:
    """Compute ``k``, ``U``, ``u`` and ``j`` (1-based).

    ``u`` is the member of ``U`` with the smallest saturated time. When the
    saturated times of ``U`` increase with the route index this is ``min U``;
    otherwise ``min U`` would ask a route to exceed its own maximum time.
    """
    net = game.network
    phi = game.exogenous_flow
    caps, tf, ts = net.capacities, net.free_flow_times, net.saturated_times
    cum, k = 0.0, len(net)
    for p, z in enumerate(caps, start=1):
        cum += z
        if phi - cum <= REL_TOL * phi:
            k = p
            break
    U = frozenset(
        p
        for p in range(1, k + 1)
        if any(ts[p - 1] <= tf[q - 1] or isclose(ts[p - 1], tf[q - 1]) for q in range(p + 1, k + 1))
    )
    if not U:
        return EquilibriumIndices(k, U)
    u = min(U, key=lambda p: ts[p - 1])
    j = min(
        p for p in range(u + 1, k + 1) if tf[p - 1] >= ts[u - 1] or isclose(tf[p - 1], ts[u - 1])
    )
    return EquilibriumIndices(k, U, u, j)


class WardropKind(enum.Enum):
    FULLY_TRANSFERRING = "fully-transferring"
    PARTIALLY_TRANSFERRING = "partially-transferring"
    INTERVAL_FAMILY = "interval-family"


@dataclass(frozen=True)
class WardropSolution:
    """Closed-form equilibrium of a game.

    For ``INTERVAL_FAMILY`` the flow on route ``u`` ranges over
    ``u_flow_interval``; ``assignment`` is the member transferring the most
    flow and ``member`` builds any other.
    """

    kind: WardropKind
    game: GameInstance
    indices: EquilibriumIndices
    assignment: TrafficAssignment
    common_travel_time: float
    psi: float
    psi_interval: tuple[float, float]
    residuals: tuple[float, ...]
    u_flow_interval: Optional[tuple[float, float]] = None
    frontier_floor: FrontierFloor = "flow"

    @property
    def routing(self) -> RoutingVector:
        return self.assignment.routing

    @property
    def fully_transferring(self) -> bool:
        return self.psi == 0.0

    def member(self, u_flow: float) -> TrafficAssignment:
        if self.kind is not WardropKind.INTERVAL_FAMILY:
            raise DomainError("only interval families have more than one member")
        lo, hi = self.u_flow_interval
        if not (lo - REL_TOL * hi <= u_flow <= hi * (1 + REL_TOL)):
            raise DomainError(f"route-u flow {u_flow} outside [{lo}, {hi}]")
        flows = _family_flows(self.game, self.indices, u_flow)
        assignment, _ = _assemble(self.game, flows, self.common_travel_time, self.frontier_floor)
        return assignment


def _family_flows(game, idx, u_flow):
    caps = game.network.capacities
    u, j = idx.u - 1, idx.j - 1
    flows = [0.0] * len(caps)
    for p in range(j):
        flows[p] = caps[p]
    flows[u] = u_flow
    flows[j] = max(game.exogenous_flow - sum(flows[:j]), 0.0)
    return flows


def _assemble(game, flows, T, floor):
    """Assignment whose used routes all take time ``T`` (where attainable)."""
    net = game.network
    dens, residuals = [], []
    for route, y in zip(net.routes, flows):
        cls = classify(y, route.capacity)
        res = 0.0
        if y == 0.0:
            x = (0.0,) * len(route)
        elif cls is RouteClass.FREE_FLOW:
            x = free_flow_densities(route, y)
        elif cls is RouteClass.SATURATED:
            x = saturated_densities(route)
        else:
            x, res = tau_inverse(route, T, mode="nearest", frontier_floor=floor)
        dens.append(x)
        residuals.append(res)
    routing = RoutingVector.from_flows(flows)
    return TrafficAssignment.build(net, game.exogenous_flow, routing, dens), tuple(residuals)


def wardrop(game: GameInstance, frontier_floor: FrontierFloor = "flow") -> WardropSolution:
    """Closed-form Wardrop equilibrium of a validated game.

    Routes carrying exactly their capacity get densities from ``tau_inverse``
    in nearest mode; any shortfall shows up in ``residuals`` instead of
    raising.
    """
    net = game.network
    phi = game.exogenous_flow
    caps, tf, ts = net.capacities, net.free_flow_times, net.saturated_times
    idx = indices(game)
    N, k = len(net), idx.k - 1

    if not idx.U:
        flows = [caps[p] if p < k else 0.0 for p in range(N)]
        flows[k] = max(phi - sum(caps[:k]), 0.0)
        T = tf[k]
        assignment, res = _assemble(game, flows, T, frontier_floor)
        return WardropSolution(
            WardropKind.FULLY_TRANSFERRING, game, idx, assignment, T, 0.0, (0.0, 0.0), res,
            frontier_floor=frontier_floor,
        )

    u, j = idx.u - 1, idx.j - 1
    T = ts[u]
    others = sum(caps[p] for p in range(j) if p != u)
    if not isclose(tf[j], ts[u]):
        flows = [caps[p] if p < j else 0.0 for p in range(N)]
        flows[u] = phi - others
        assignment, res = _assemble(game, flows, T, frontier_floor)
        psi = phi - sum(caps[:j])
        return WardropSolution(
            WardropKind.PARTIALLY_TRANSFERRING, game, idx, assignment, T, psi, (psi, psi), res,
            frontier_floor=frontier_floor,
        )

    hi = phi - others
    lo = max(caps[u], hi - caps[j])
    flows = _family_flows(game, idx, lo)
    assignment, res = _assemble(game, flows, T, frontier_floor)
    psi_lo, psi_hi = lo - caps[u], hi - caps[u]
    if isclose(lo, caps[u]):
        psi_lo = 0.0
    return WardropSolution(
        WardropKind.INTERVAL_FAMILY, game, idx, assignment, T, psi_lo, (psi_lo, psi_hi), res,
        u_flow_interval=(lo, hi), frontier_floor=frontier_floor,
    )


def psi_bounds(solution: WardropSolution, game: GameInstance) -> tuple[float, float]:
    """Range of non-transferred flow over all equilibria of the game."""
    caps = game.network.capacities
    phi = game.exogenous_flow
    idx = solution.indices
    if solution.kind is WardropKind.FULLY_TRANSFERRING:
        return (0.0, 0.0)
    j, k = idx.j, idx.k
    below_j = phi - sum(caps[: j - 1])
    if solution.kind is WardropKind.PARTIALLY_TRANSFERRING:
        return (below_j, below_j)
    if j < k:
        return (phi - sum(caps[:j]), below_j)
    return (0.0, below_j)


@dataclass(frozen=True)
class WardropReport:
    """Outcome of :func:`is_wardrop`; truthy when the condition holds.

    ``lemma1`` lists ``(p, q)`` pairs (1-based) where route ``p`` is used
    while an earlier route ``q`` is below capacity; ``lemma2`` lists used
    routes beyond index ``k``.
    """

    ok: bool
    times: tuple[float, ...]
    violation: float
    lemma1: tuple[tuple[int, int], ...] = ()
    lemma2: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def route_times(assignment: TrafficAssignment) -> tuple[float, ...]:
    """Route travel times; unused routes report their free-flow time."""
    out = []
    for route, r, x, f in zip(
        assignment.network.routes, assignment.routing, assignment.densities, assignment.flows
    ):
        out.append(route_travel_time(route, x, f) if r > 0 else route.free_flow_time)
    return tuple(out)


def is_wardrop(game: GameInstance, assignment: TrafficAssignment, eps: float = 1e-9) -> WardropReport:
    """Check that no used route is slower than any route by more than ``eps`` hours."""
    if not is_consistent(assignment):
        raise DomainError("assignment is not consistent")
    times = route_times(assignment)
    R = assignment.routing
    used = [p for p in range(len(R)) if R[p] > 0]
    violation = max(times[p] for p in used) - min(times)
    phi = game.exogenous_flow
    caps = game.network.capacities
    lemma1 = tuple(
        (p + 1, q + 1)
        for p in used
        for q in range(p)
        if phi * R[q] < caps[q] and not isclose(phi * R[q], caps[q])
    )
    k = indices(game).k
    lemma2 = tuple(p + 1 for p in used if p + 1 > k)
    return WardropReport(violation <= eps, times, violation, lemma1, lemma2)


def total_cost(assignment: TrafficAssignment) -> float:
    """Total travel time in veh*h: realised route flow times route travel time."""
    return sum(
        assignment.route_flow(p) * t
        for p, t in enumerate(route_times(assignment))
        if assignment.routing[p] > 0
    )


@dataclass(frozen=True)
class SocialOptimum:
    assignment: TrafficAssignment
    total_cost: float


def social_optimum(game: GameInstance) -> SocialOptimum:
    """Fill the fastest routes to capacity in free flow; the next takes the rest."""
    net = game.network
    k = indices(game).k - 1
    caps = net.capacities
    flows = [caps[p] if p < k else 0.0 for p in range(len(net))]
    flows[k] = max(game.exogenous_flow - sum(caps[:k]), 0.0)
    dens = [free_flow_densities(r, y) for r, y in zip(net.routes, flows)]
    assignment = TrafficAssignment.build(
        net, game.exogenous_flow, RoutingVector.from_flows(flows), dens
    )
    cost = sum(y * r.free_flow_time for r, y in zip(net.routes, flows))
    return SocialOptimum(assignment, cost)


@dataclass(frozen=True)
class Undefined:
    """Marker returned where a quantity has no meaning; always falsy."""

    reason: str

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"undefined ({self.reason})"


def price_of_anarchy(game: GameInstance, solution: Optional[WardropSolution] = None):
    """Ratio of equilibrium to optimal total travel time.

    Returns :class:`Undefined` when the equilibrium is partially transferring:
    it then moves less flow than the optimum, so the ratio compares unlike
    quantities.
    """
    solution = solution or wardrop(game)
    if not solution.fully_transferring:
        return Undefined("partially transferring equilibrium")
    net = game.network
    phi = game.exogenous_flow
    k = solution.indices.k - 1
    caps, tf = net.capacities, net.free_flow_times
    head = sum(caps[:k])
    return phi * tf[k] / (sum(c * t for c, t in zip(caps[:k], tf[:k])) + (phi - head) * tf[k])


# --------------------------------------------------------------------------
# brute-force oracle


def simplex_grid(n_routes: int, steps: int) -> np.ndarray:
    """All integer compositions of ``steps`` into ``n_routes`` parts."""
    if n_routes == 1:
        return np.array([[steps]], dtype=np.int64)
    rows = []
    for bars in itertools.combinations(range(steps + n_routes - 1), n_routes - 1):
        prev, row = -1, []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(steps + n_routes - 2 - prev)
        rows.append(row)
    return np.array(rows, dtype=np.int64)


@dataclass(frozen=True)
class OracleSurvivor:
    grid_point: tuple[float, ...]
    witness: TrafficAssignment
    common_time: float


@dataclass
class OracleResult:
    survivors: list[OracleSurvivor] = field(default_factory=list)
    diagnostic: str = ""

    def __iter__(self):
        return iter(self.survivors)

    def __len__(self):
        return len(self.survivors)


def _flow_sets(T, caps, tf, ts, phi):
    """Per-route range of flows compatible with a common used-route time ``T``."""
    lo, hi = [], []
    for z, a, b in zip(caps, tf, ts):
        at_f, at_s = isclose(T, a), isclose(T, b)
        if at_f and at_s:
            lo.append(0.0), hi.append(phi)
        elif at_f:
            lo.append(0.0), hi.append(z)
        elif T < a:
            lo.append(0.0), hi.append(0.0)
        elif at_s:
            lo.append(z), hi.append(phi)
        elif T < b:
            lo.append(z), hi.append(z)
        else:
            lo.append(math.nan), hi.append(math.nan)
    return np.array(lo), np.array(hi)


def oracle_wardrop(
    game: GameInstance,
    resolution: float = 1 / 200,
    eps: float = 1e-6,
    frontier_floor: FrontierFloor = "flow",
) -> OracleResult:
    """Grid search for Wardrop equilibria, independent of the closed form.

    Each point ``R`` of the routing simplex at spacing ``h`` is tested for an
    equilibrium ``R'`` with ``|R' - R| <= h`` componentwise: for every
    candidate common time (the route time breakpoints and the midpoints
    between them) the flows each route may carry are intersected with the
    band around ``R``. Feasible points get a witness assignment built from
    actual densities, which must pass :func:`is_wardrop` at ``eps``.
    """
    net = game.network
    N = len(net)
    if N > 4:
        raise DomainError("oracle_wardrop supports at most 4 routes")
    steps = int(round(1 / resolution))
    phi = game.exogenous_flow
    caps, tf, ts = net.capacities, net.free_flow_times, net.saturated_times
    grid = simplex_grid(N, steps)
    band_lo = phi * np.maximum(grid - 1, 0) / steps
    band_hi = phi * np.minimum(grid + 1, steps) / steps

    marks = sorted(set(tf) | set(ts))
    candidates = list(marks) + [(a + b) / 2 for a, b in zip(marks, marks[1:])]
    result = OracleResult()
    done = np.zeros(len(grid), dtype=bool)
    for T in candidates:
        a, b = _flow_sets(T, caps, tf, ts, phi)
        if np.isnan(a).any():
            continue
        lo = np.maximum(band_lo, a)
        hi = np.minimum(band_hi, b)
        slack = REL_TOL * phi
        ok = (lo <= hi + slack).all(axis=1)
        ok &= lo.sum(axis=1) <= phi + slack
        ok &= hi.sum(axis=1) >= phi - slack
        ok &= ~done
        for i in np.flatnonzero(ok):
            l, h = lo[i], np.maximum(hi[i], lo[i])
            room = float((h - l).sum())
            lam = 0.0 if room <= 0 else min(max((phi - l.sum()) / room, 0.0), 1.0)
            flows = [float(x) for x in l + lam * (h - l)]
            # snap near-capacity flows so the route class is unambiguous
            flows = [c if isclose(y, c, 1e-12) else y for y, c in zip(flows, caps)]
            if sum(flows) <= 0:
                continue
            witness, _ = _assemble(game, flows, T, frontier_floor)
            if is_wardrop(game, witness, eps):
                done[i] = True
                result.survivors.append(
                    OracleSurvivor(tuple(float(g) / steps for g in grid[i]), witness, T)
                )
    if not result.survivors:
        result.diagnostic = f"no grid point survived at resolution 1/{steps}"
        warnings.warn(result.diagnostic, RuntimeWarning, stacklevel=2)
    return result
