import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctmroute.assignment import (
    RouteClass,
    RoutingVector,
    TrafficAssignment,
    classify,
    classify_routes,
    consistent_density,
    frontier_bounds,
    interface_flows,
    is_consistent,
    route_family,
    route_is_consistent,
    transfer_accounting,
)
from ctmroute.errors import DomainError

from _games import EXAMPLE2_LENGTHS, random_route, paper_network

NET = paper_network(EXAMPLE2_LENGTHS)


class TestRoutingVector:
    def test_parse_fractions(self):
        r = RoutingVector.parse("1/3, 2/3")
        assert r.ratios == (1 / 3, 2 / 3)

    def test_parse_decimal_rounding(self):
        r = RoutingVector.parse("0.1,0.2,0.7")
        assert sum(r) == pytest.approx(1, abs=1e-15)

    @pytest.mark.parametrize("text", ["0.5,0.6", "a,b", "1/0,1", "-0.5,1.5", ""])
    def test_rejects_bad_input(self, text):
        with pytest.raises(DomainError):
            RoutingVector.parse(text)

    def test_from_flows(self):
        r = RoutingVector.from_flows([1000, 500])
        assert r.ratios == pytest.approx((2 / 3, 1 / 3))
        assert sum(r) == 1.0
        with pytest.raises(DomainError):
            RoutingVector.from_flows([0, 0])

    def test_sequence_protocol(self):
        r = RoutingVector((0.25, 0.75))
        assert len(r) == 2 and r[1] == 0.75 and list(r) == [0.25, 0.75]


class TestClasses:
    def test_classify(self):
        assert classify(999, 1000) is RouteClass.FREE_FLOW
        assert classify(1000 * (1 + 1e-12), 1000) is RouteClass.CRITICAL
        assert classify(1001, 1000) is RouteClass.SATURATED
        assert RouteClass.SATURATED.label == "P_S"

    def test_classify_routes_checks_lengths(self):
        with pytest.raises(DomainError):
            classify_routes(NET, 1500, RoutingVector((1.0,)))
        with pytest.raises(DomainError):
            classify_routes(NET, -1, RoutingVector((0.5, 0.5)))


class TestExampleOne:
    def test_free_flow(self):
        fam = consistent_density(NET, 1500, RoutingVector((1 / 3, 2 / 3)))
        assert fam.classes == [RouteClass.FREE_FLOW] * 2
        assert fam.flat() == pytest.approx((12.5,) * 3 + (25.0,) * 4)
        assert all(r.unique for r in fam.routes)

    def test_saturated(self):
        fam = consistent_density(NET, 1500, RoutingVector((0.75, 0.25)))
        assert fam.classes == [RouteClass.SATURATED, RouteClass.FREE_FLOW]
        assert fam.flat() == pytest.approx((87.5, 87.5, 25, 9.375, 9.375, 9.375, 9.375), abs=1e-9)
        transferred, psi = transfer_accounting(NET, 1500, RoutingVector((0.75, 0.25)))
        assert transferred == [1000, 375]
        assert psi == pytest.approx(125)

    def test_critical_family(self):
        fam = consistent_density(NET, 1500, RoutingVector((2 / 3, 1 / 3)))
        r1 = fam.routes[0]
        assert r1.route_class is RouteClass.CRITICAL
        assert r1.canonical == pytest.approx((25, 25, 25))
        (f0, f1) = sorted(r1.frontiers, key=lambda f: f.position)
        assert (f0.lower, f0.upper) == pytest.approx((25, 87.5))
        assert f0.member(50) == pytest.approx((50, 87.5, 25))
        assert (f1.lower, f1.upper) == pytest.approx((25, 87.5))
        assert f1.member(50) == pytest.approx((25, 50, 25))
        with pytest.raises(DomainError):
            f1.member(90)

    def test_critical_floor_variant(self):
        r1 = NET.routes[0]
        assert frontier_bounds(r1, 0, "critical") == pytest.approx((37.5, 87.5))
        assert frontier_bounds(r1, 0, "flow") == pytest.approx((25, 87.5))
        # a member below critical density that the critical floor leaves out
        assert route_is_consistent(r1, (30, 87.5, 25), 1000)


class TestGridUniqueness:
    """Brute force over densities on an x_bar/200 grid, independent of the closed form."""

    @staticmethod
    def _grid_consistent(route, nominal, steps=200):
        links = route.links
        grids = [np.linspace(0, l.jam_density, steps + 1) for l in links]
        hs = [l.jam_density / steps for l in links]
        slope = max(max(l.free_speed, l.wave_speed) for l in links)
        tol = slope * max(hs) * 0.5

        def s(l, x):
            return np.minimum(l.capacity, l.wave_speed * (l.jam_density - x))

        def d(l, x):
            return np.minimum(l.free_speed * x, l.capacity)

        hits = []
        x1 = grids[0][:, None, None]
        x2 = grids[1][None, :, None]
        x3 = grids[2][None, None, :]
        f = [
            np.minimum(nominal, s(links[0], x1)),
            np.minimum(d(links[0], x1), s(links[1], x2)),
            np.minimum(d(links[1], x2), s(links[2], x3)),
            d(links[2], x3),
        ]
        f = np.broadcast_arrays(*f)
        hi = np.max(f, axis=0)
        lo = np.min(f, axis=0)
        ok = (hi - lo <= tol) & (np.abs(lo - min(nominal, route.capacity)) <= tol)
        for i, j, k in zip(*np.nonzero(ok)):
            hits.append((grids[0][i], grids[1][j], grids[2][k]))
        return hits, hs

    @staticmethod
    def _dist_to_family(fam, x):
        best = max(abs(a - b) for a, b in zip(x, fam.canonical))
        for fr in fam.frontiers:
            y = min(max(x[fr.position], fr.lower), fr.upper)
            best = min(best, max(abs(a - b) for a, b in zip(x, fr.member(y))))
        return best

    @pytest.mark.parametrize("nominal", [500.0, 1000.0, 1200.0])
    def test_grid_points_lie_on_closed_form(self, nominal):
        route = NET.routes[0]
        fam = route_family(route, nominal)
        hits, hs = self._grid_consistent(route, nominal)
        assert hits
        for x in hits:
            assert self._dist_to_family(fam, x) <= 2 * max(hs)

    def test_family_members_found_by_grid_including_flow_floor(self):
        route = NET.routes[0]
        fam = route_family(route, 1000.0)
        hits, hs = self._grid_consistent(route, 1000.0)
        pts = np.array(hits)
        # every sampled family member, including those below critical density,
        # has a brute-force consistent grid point nearby
        for fr in fam.frontiers:
            for y in np.linspace(fr.lower, fr.upper, 9):
                m = np.array(fr.member(y))
                assert np.abs(pts - m).max(axis=1).min() <= 2 * max(hs)
        below_critical = pts[(pts[:, 0] > 26) & (pts[:, 0] < 37)]
        assert len(below_critical) > 0


class TestInterfaceFlows:
    def test_saturated_route(self):
        route = NET.routes[0]
        f = interface_flows(route, (87.5, 87.5, 25), 1125)
        assert f == pytest.approx([1000] * 4)

    def test_validation(self):
        route = NET.routes[0]
        with pytest.raises(DomainError):
            interface_flows(route, (1, 2), 100)
        with pytest.raises(DomainError):
            interface_flows(route, (1, 2, 3), -1)

    def test_assignment_accounting(self):
        a = TrafficAssignment.canonical(NET, 1500, RoutingVector((0.75, 0.25)))
        assert is_consistent(a)
        assert a.transferred == pytest.approx(1375)
        assert a.psi == pytest.approx(125)
        assert a.route_flow(0) == pytest.approx(1000)

    def test_inconsistent_assignment_detected(self):
        a = TrafficAssignment.build(NET, 1500, RoutingVector((0.5, 0.5)), [(10, 10, 10), (0, 0, 0, 0)])
        assert not is_consistent(a)

    def test_build_checks_shape(self):
        with pytest.raises(DomainError):
            TrafficAssignment.build(NET, 1500, RoutingVector((0.5, 0.5)), [(10, 10, 10)])


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), share=st.floats(0, 2.5))
def test_family_members_consistent(seed, share):
    route = random_route(np.random.default_rng(seed))
    nominal = share * route.capacity
    fam = route_family(route, nominal)
    for x in fam.members():
        assert route_is_consistent(route, x, nominal)
        assert interface_flows(route, x, nominal)[0] == pytest.approx(min(nominal, route.capacity))
