import math

import numpy as np
import pytest

from ctmroute import kernels
from ctmroute.assignment import RoutingVector, TrafficAssignment
from ctmroute.equilibrium import route_times
from ctmroute.errors import DomainError
from ctmroute.fundamental import Link
from ctmroute.generalnet import (
    GeneralNetwork,
    from_parallel,
    general_route_times,
    search_equilibrium,
    steady_state,
    steady_states,
    wardrop_violation,
    wheatstone,
)

from _games import EXAMPLE2_LENGTHS, EXAMPLE3_LENGTHS, paper_network, random_network

BACKENDS = kernels.available()


def _link(cap=1500, L=1.0):
    return Link.make(cap, 187.5, 40, L)


class TestValidation:
    def test_cycle(self):
        with pytest.raises(DomainError, match="cycle"):
            GeneralNetwork((_link(), _link()), ("O", "A"), ("A", "O"), "O", "A", ((0,),))

    def test_route_must_join_origin_and_destination(self):
        with pytest.raises(DomainError):
            GeneralNetwork((_link(), _link()), ("O", "A"), ("A", "D"), "O", "D", ((0,),))

    def test_route_must_be_connected(self):
        links = (_link(), _link(), _link())
        with pytest.raises(DomainError, match="connected"):
            GeneralNetwork(links, ("O", "A", "B"), ("A", "D", "D"), "O", "D", ((0, 2),))

    def test_unknown_link(self):
        with pytest.raises(DomainError):
            GeneralNetwork((_link(),), ("O",), ("D",), "O", "D", ((3,),))

    def test_self_loop(self):
        with pytest.raises(DomainError):
            GeneralNetwork((_link(),), ("O",), ("O",), "O", "O", ((0,),))

    def test_wheatstone_free_flow_times(self):
        net = wheatstone()
        assert [t * 60 for t in net.free_flow_times()] == pytest.approx([36, 30, 36])


@pytest.mark.parametrize("backend", BACKENDS)
class TestParallelEmbedding:
    def test_saturated_route(self, backend):
        par = paper_network(EXAMPLE2_LENGTHS)
        net = from_parallel(par)
        st = steady_state(net, 1500, RoutingVector((1.0, 0.0)), tol=1e-12, backend=backend)
        assert st.converged
        assert st.densities == pytest.approx((87.5, 87.5, 25, 0, 0, 0, 0), abs=1e-5)
        assert st.psi == pytest.approx(500, abs=1e-5)
        assert general_route_times(net, st)[0] * 60 == pytest.approx(11.25, abs=1e-5)

    def test_critical_route_relaxes_to_free_flow_member(self, backend):
        par = paper_network(EXAMPLE3_LENGTHS)
        net = from_parallel(par)
        R = RoutingVector((2 / 3, 1 / 3))
        st = steady_state(net, 1500, R, backend=backend)
        canon = TrafficAssignment.canonical(par, 1500, R)
        assert st.densities == pytest.approx(sum(canon.densities, ()), abs=1e-5)
        assert general_route_times(net, st) == pytest.approx(route_times(canon), abs=1e-7)
        assert st.psi == pytest.approx(0, abs=1e-5)

    @pytest.mark.parametrize("seed", range(4))
    def test_random_networks_match_closed_form(self, backend, seed):
        rng = np.random.default_rng(100 + seed)
        par = random_network(rng)
        net = from_parallel(par)
        for ratios in rng.dirichlet(np.ones(len(par)), size=3):
            R = RoutingVector.from_flows(ratios)
            phi = float(rng.uniform(0.2, 1.0)) * par.min_cut
            # keep clear of the critical case, where the closed form is a family
            if any(abs(phi * r - c) < 1e-3 * c for r, c in zip(R, par.capacities)):
                continue
            st = steady_state(net, phi, R, tol=1e-12, backend=backend)
            canon = TrafficAssignment.canonical(par, phi, R)
            assert st.converged
            assert st.densities == pytest.approx(sum(canon.densities, ()), rel=1e-4, abs=1e-4)
            assert st.psi == pytest.approx(canon.psi, rel=1e-5, abs=1e-3)


@pytest.mark.parametrize("backend", BACKENDS)
def test_conservation_and_bounds(backend):
    net = wheatstone()
    states = steady_states(net, 1600, [RoutingVector((0.2, 0.5, 0.3)), RoutingVector((0, 9 / 16, 7 / 16))], backend=backend)
    for st in states:
        assert st.converged
        jam = np.array([l.jam_density for l in net.links])
        assert (np.array(st.densities) >= 0).all() and (np.array(st.densities) <= jam + 1e-9).all()
        # steady state: inflow equals outflow on every link
        assert st.inflows == pytest.approx(st.flows, abs=1e-3)
        delivered = sum(st.route_densities[r[-1], p] / max(st.densities[r[-1]], 1e-300) * st.flows[r[-1]]
                        for p, r in enumerate(net.routes))
        assert delivered == pytest.approx(sum(st.admitted), abs=1e-3)
        assert st.psi == pytest.approx(1600 - sum(st.admitted))


def test_step_above_stability_bound():
    net = wheatstone()
    with pytest.raises(DomainError, match="stability"):
        steady_state(net, 100, RoutingVector((1, 0, 0)), step_h=net.cfl_step() * 1.5)


def test_routing_length_and_phi_checked():
    net = wheatstone()
    with pytest.raises(DomainError):
        steady_state(net, 100, RoutingVector((0.5, 0.5)))
    with pytest.raises(DomainError):
        steady_state(net, -1, RoutingVector((1, 0, 0)))
    assert steady_states(net, 100, []) == []


def test_max_steps_reports_non_convergence():
    st = steady_state(wheatstone(), 1600, RoutingVector((0, 0.5, 0.5)), max_steps=3)
    assert not st.converged and st.steps == 3


def test_wardrop_violation():
    assert wardrop_violation(RoutingVector((0, 1, 0)), (0.6, 0.5, 0.6)) == 0
    assert wardrop_violation(RoutingVector((0.5, 0.5, 0)), (0.6, 0.5, 0.4)) == pytest.approx(0.2)


class TestSearch:
    def test_light_demand_takes_fastest_route(self):
        survivors = search_equilibrium(wheatstone(), 100, resolution=1 / 16)
        assert [c.routing.ratios for c in survivors] == [(0.0, 1.0, 0.0)]
        assert survivors[0].psi == pytest.approx(0, abs=1e-6)

    def test_zero_demand_is_empty(self):
        best = search_equilibrium(wheatstone(), 0, resolution=1 / 8)[0]
        assert best.state.densities == (0.0,) * 5
        assert best.psi == 0

    def test_keep_all_is_sorted(self):
        out = search_equilibrium(wheatstone(), 1600, resolution=1 / 8, keep_all=True)
        assert len(out) == 45
        v = [c.violation for c in out]
        assert v == sorted(v)
        assert all(math.isfinite(t) for c in out for t in c.times)

    def test_route_limit(self):
        links = tuple(_link(1000 + i, 1 + i) for i in range(5))
        net = GeneralNetwork(links, ("O",) * 5, ("D",) * 5, "O", "D", tuple((i,) for i in range(5)))
        with pytest.raises(DomainError):
            search_equilibrium(net, 100)


class TestSpecInstances:
    def test_wheatstone_reference_routing(self):
        st = steady_state(wheatstone(), 1600, RoutingVector((0, 9 / 16, 7 / 16)))
        assert st.converged
        assert st.admitted == pytest.approx((0, 800, 700), abs=1e-3)
        assert st.psi == pytest.approx(100, abs=1e-3)
        assert st.densities[0] == pytest.approx(107.5, abs=1e-3)
        assert st.densities[2] == pytest.approx(20, abs=1e-3)
        assert st.densities[4] == pytest.approx(37.5, abs=1e-3)
        times = general_route_times(wheatstone(), st)
        # the unused route shares the congested first link and is the slowest
        assert times[0] > max(times[1:])

    def test_single_route(self):
        net = GeneralNetwork((_link(1000, 1), _link(1500, 2)), ("O", "A"), ("A", "D"), "O", "D", ((0, 1),))
        survivors = search_equilibrium(net, 800, resolution=1 / 4)
        assert [c.routing.ratios for c in survivors] == [(1.0,)]

    def test_critical_equilibrium_invisible_from_empty_start(self):
        # relaxing from an empty network picks the free-flow member of a
        # critical route's family, so the 12 min equilibrium time is not seen
        par = paper_network(EXAMPLE3_LENGTHS)
        net = from_parallel(par)
        st = steady_state(net, 1500, RoutingVector((2 / 3, 1 / 3)), tol=1e-12)
        assert [t * 60 for t in general_route_times(net, st)] == pytest.approx([6.75, 12], abs=1e-6)
        assert search_equilibrium(net, 1500, resolution=1 / 64) == []

    def test_unused_time_modes(self):
        net = wheatstone()
        a = search_equilibrium(net, 1600, resolution=1 / 8, keep_all=True)
        b = search_equilibrium(net, 1600, resolution=1 / 8, keep_all=True, unused_time="free_flow")
        by_r = {c.routing: c for c in b}
        for c in a:
            free = net.free_flow_times()
            expect = tuple(t if r > 0 else f for t, r, f in zip(c.times, c.routing, free))
            assert by_r[c.routing].times == expect
        with pytest.raises(DomainError):
            search_equilibrium(net, 1600, unused_time="never")

    @pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")
    def test_threaded_batches_match(self):
        net = wheatstone()
        Rs = [RoutingVector(tuple(r)) for r in np.random.default_rng(3).dirichlet(np.ones(3), size=9)]
        one = steady_states(net, 1600, Rs, workers=1, backend="compiled")
        many = steady_states(net, 1600, Rs, workers=4, backend="compiled")
        assert [s.densities for s in one] == [s.densities for s in many]
