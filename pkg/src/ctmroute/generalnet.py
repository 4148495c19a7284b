"""Experimental support for general single-origin networks of CTM cells.

Links form a directed acyclic graph. The steady state for a routing vector is
found by integrating a multi-commodity cell transmission model from an empty
network until densities stop changing:

* a link's demand is split among routes in proportion to their share of its
  density;
* at every link entrance, competing requests (from upstream links and, for
  first links, from the origin) share the link's supply in proportion to
  their size;
* flow the origin cannot place is dropped and counted as non-transferred.

These semantics extend the parallel model and give only qualitative
agreement with hand-derived equilibria on general topologies.
"""

from __future__ import annotations

import graphlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from . import kernels
from .assignment import RoutingVector
from .equilibrium import simplex_grid
from .errors import DomainError
from .fundamental import Link, ParallelNetwork


@dataclass(frozen=True)
class GeneralNetwork:
    links: tuple[Link, ...]
    tails: tuple[str, ...]
    heads: tuple[str, ...]
    origin: str
    destination: str
    routes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.links)
        if not (len(self.tails) == len(self.heads) == n) or n == 0:
            raise DomainError("every link needs one tail and one head node")
        graph: dict[str, set[str]] = {}
        for t, h in zip(self.tails, self.heads):
            if t == h:
                raise DomainError(f"self-loop at node {t!r}")
            graph.setdefault(h, set()).add(t)
        try:
            tuple(graphlib.TopologicalSorter(graph).static_order())
        except graphlib.CycleError as exc:
            raise DomainError(f"network contains a cycle: {exc.args[1]}") from None
        if not self.routes:
            raise DomainError("at least one route is required")
        for p, route in enumerate(self.routes):
            if not route or any(not 0 <= i < n for i in route):
                raise DomainError(f"route {p + 1} references unknown links")
            nodes = [self.tails[route[0]]] + [self.heads[i] for i in route]
            if nodes[0] != self.origin or nodes[-1] != self.destination:
                raise DomainError(f"route {p + 1} does not join origin to destination")
            if any(self.heads[a] != self.tails[b] for a, b in zip(route, route[1:])):
                raise DomainError(f"route {p + 1} is not a connected path")
            if len(set(nodes)) != len(nodes):
                raise DomainError(f"route {p + 1} is not a simple path")

    @property
    def n_routes(self) -> int:
        return len(self.routes)

    def free_flow_times(self) -> tuple[float, ...]:
        return tuple(sum(self.links[i].free_flow_time for i in r) for r in self.routes)

    def cfl_step(self) -> float:
        """Largest stable integration step in hours."""
        return min(l.length / max(l.free_speed, l.wave_speed) for l in self.links)

    def _arrays(self):
        L, R = len(self.links), len(self.routes)
        nxt = np.full((L, R), -2, dtype=np.int64)
        for r, route in enumerate(self.routes):
            for a, b in zip(route, route[1:]):
                nxt[a, r] = b
            nxt[route[-1], r] = -1
        first = np.array([route[0] for route in self.routes], dtype=np.int64)
        cols = [
            np.array([getattr(l, name) for l in self.links], dtype=float)
            for name in ("capacity", "jam_density", "free_speed", "wave_speed", "length")
        ]
        return (*cols, nxt, first)


def from_parallel(network: ParallelNetwork) -> GeneralNetwork:
    """Embed a parallel network: route ``p`` runs through its own chain of nodes."""
    links, tails, heads, routes = [], [], [], []
    for p, route in enumerate(network.routes):
        ids = []
        for i, link in enumerate(route.links):
            tails.append("O" if i == 0 else f"r{p}n{i}")
            heads.append("D" if i == len(route.links) - 1 else f"r{p}n{i + 1}")
            ids.append(len(links))
            links.append(link)
        routes.append(tuple(ids))
    return GeneralNetwork(tuple(links), tuple(tails), tuple(heads), "O", "D", tuple(routes))


def wheatstone() -> GeneralNetwork:
    """Five-link diamond with a low-capacity shortcut from A to B.

    Routes: 1 = links (1, 4), 2 = links (1, 3, 5) through the shortcut,
    3 = links (2, 5).
    """
    caps = (1500, 1500, 800, 1500, 1500)
    jams = (187.5, 187.5, 100, 187.5, 187.5)
    lengths = (8, 16, 4, 16, 8)
    links = tuple(
        Link.make(c, x, 40, L, name=str(i + 1)) for i, (c, x, L) in enumerate(zip(caps, jams, lengths))
    )
    return GeneralNetwork(
        links,
        tails=("O", "O", "A", "A", "B"),
        heads=("A", "B", "B", "D", "D"),
        origin="O",
        destination="D",
        routes=((0, 3), (0, 2, 4), (1, 4)),
    )


@dataclass(frozen=True)
class GeneralState:
    """Steady state of a general network under one routing vector."""

    routing: RoutingVector
    exogenous_flow: float
    densities: tuple[float, ...]
    flows: tuple[float, ...]
    inflows: tuple[float, ...]
    route_densities: np.ndarray
    admitted: tuple[float, ...]
    psi: float
    steps: int
    converged: bool


def _check_step(net, step_h):
    bound = net.cfl_step()
    if step_h is None:
        return 0.5 * bound
    if not (0 < step_h <= bound * (1 + 1e-12)):
        raise DomainError(f"step {step_h} h violates the stability bound {bound} h")
    return step_h


def steady_states(
    net: GeneralNetwork,
    phi: float,
    routings: Sequence[RoutingVector],
    step_h: Optional[float] = None,
    tol: float = 1e-8,
    max_steps: int = 10**6,
    backend: Optional[str] = None,
    workers: Optional[int] = None,
) -> list[GeneralState]:
    """Batched :func:`steady_state`.

    With the compiled backend the batch is split across ``workers`` threads
    (default: one per CPU); the kernel releases the GIL, and results are
    merged in input order.
    """
    if not (phi >= 0 and math.isfinite(phi)):
        raise DomainError(f"exogenous flow must be non-negative, got {phi!r}")
    dt = _check_step(net, step_h)
    routings = [r if isinstance(r, RoutingVector) else RoutingVector(tuple(r)) for r in routings]
    for r in routings:
        if len(r) != net.n_routes:
            raise DomainError(f"routing vector has {len(r)} entries for {net.n_routes} routes")
    if not routings:
        return []
    cap, jam, vf, w, length, nxt, first = net._arrays()
    nominal = phi * np.array([r.ratios for r in routings], dtype=float)
    args = (cap, jam, vf, w, length, nxt, first)
    n_workers = min(workers or os.cpu_count() or 1, len(routings))
    if n_workers > 1 and (backend or kernels.BACKEND) == "compiled":
        chunks = np.array_split(nominal, n_workers)
        with ThreadPoolExecutor(n_workers) as pool:
            parts = list(
                pool.map(lambda c: kernels.relax(*args, c, dt, tol, max_steps, backend="compiled"), chunks)
            )
        x, out, adm, steps, conv = (np.concatenate(p) for p in zip(*parts))
    else:
        x, out, adm, steps, conv = kernels.relax(*args, nominal, dt, tol, max_steps, backend=backend)
    states = []
    for b, routing in enumerate(routings):
        xb, ob = x[b], out[b]
        inflow = np.zeros(len(net.links))
        for r, route in enumerate(net.routes):
            inflow[route[0]] += adm[b, r]
            for a, c in zip(route, route[1:]):
                inflow[c] += ob[a, r]
        admitted = tuple(float(a) for a in adm[b])
        states.append(
            GeneralState(
                routing=routing,
                exogenous_flow=float(phi),
                densities=tuple(float(v) for v in xb.sum(axis=1)),
                flows=tuple(float(v) for v in ob.sum(axis=1)),
                inflows=tuple(float(v) for v in inflow),
                route_densities=xb.copy(),
                admitted=admitted,
                psi=max(float(phi) - sum(admitted), 0.0),
                steps=int(steps[b]),
                converged=bool(conv[b]),
            )
        )
    return states


def steady_state(
    net: GeneralNetwork,
    phi: float,
    routing: RoutingVector,
    step_h: Optional[float] = None,
    tol: float = 1e-8,
    max_steps: int = 10**6,
    backend: Optional[str] = None,
) -> GeneralState:
    """Integrate the network from empty until the largest per-step density
    change, relative to jam density, falls below ``tol``.

    ``step_h`` defaults to half the stability bound ``min L / max(v, w)``.
    A state with ``converged=False`` is returned after ``max_steps``.

    Raises:
        DomainError: ``step_h`` above the stability bound.
    """
    return steady_states(net, phi, [routing], step_h, tol, max_steps, backend)[0]


UnusedTime = Literal["state", "free_flow"]


def general_route_times(net: GeneralNetwork, state: GeneralState) -> tuple[float, ...]:
    """Route travel times from link densities and realised link outflows."""
    link_times = []
    for link, x, f in zip(net.links, state.densities, state.flows):
        if x <= 0.0:
            link_times.append(link.free_flow_time)
        elif f <= 0.0:
            link_times.append(math.inf)
        else:
            link_times.append(link.length * x / f)
    return tuple(sum(link_times[i] for i in route) for route in net.routes)


@dataclass(frozen=True)
class Candidate:
    routing: RoutingVector
    state: GeneralState
    times: tuple[float, ...]
    violation: float

    @property
    def psi(self) -> float:
        return self.state.psi


def wardrop_violation(routing: RoutingVector, times: Sequence[float]) -> float:
    """Largest excess of a used route's time over the fastest route's time."""
    used = [t for r, t in zip(routing, times) if r > 0]
    return max(used) - min(times)


def search_equilibrium(
    net: GeneralNetwork,
    phi: float,
    resolution: float = 1 / 64,
    eps: float = 1 / 30,
    keep_all: bool = False,
    unused_time: UnusedTime = "state",
    **solver,
) -> list[Candidate]:
    """Grid search over the routing simplex for approximate equilibria.

    Every grid point is relaxed to steady state. Points where no used route
    is more than ``eps`` hours slower than any route survive, sorted by
    violation and then by non-transferred flow. ``keep_all`` returns every
    grid point in the same order, survivors first.

    With ``unused_time="state"`` every route is timed on the current link
    states, so an unused route that shares a congested link sees that
    congestion; ``"free_flow"`` charges unused routes their free-flow time.
    """
    if unused_time not in ("state", "free_flow"):
        raise DomainError(f"unknown unused_time {unused_time!r}")
    if net.n_routes > 4:
        raise DomainError("search_equilibrium supports at most 4 routes")
    steps = int(round(1 / resolution))
    grid = simplex_grid(net.n_routes, steps)
    routings = [RoutingVector(tuple(g / steps for g in row)) for row in grid]
    free = net.free_flow_times()
    out = []
    for routing, state in zip(routings, steady_states(net, phi, routings, **solver)):
        times = general_route_times(net, state)
        if unused_time == "free_flow":
            times = tuple(t if r > 0 else f for t, r, f in zip(times, routing, free))
        out.append(Candidate(routing, state, times, wardrop_violation(routing, times)))
    out.sort(key=lambda c: (c.violation, c.psi))
    if keep_all:
        return out
    return [c for c in out if c.violation <= eps and c.state.converged]
