import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcbmsn.adversary import EvidenceLedger
from mcbmsn.beamforming import EnergyModel, RelaySelectionParams
from mcbmsn.exceptions import StaleRouteError
from mcbmsn.routing import (LinkCostTable, Route, build_link_costs, deliver_frame, heal_partition,
                            partitioned_clusters, route_cost, routes_to_csv, shortest_routes)
from mcbmsn.topology import (ChannelModel, GridSpec, Topology, calibrated_reference_loss, dbm_to_w,
                             required_tx_power_dbm)

MODEL = EnergyModel()
# a 30 dBm sensor reaches exactly 200 m
CH200 = ChannelModel(reference_loss_db=calibrated_reference_loss(200.0, 30.0, 3.0, -100.0))


def topology(points, side=200.0, cells=4, energy=5.0):
    pts = np.asarray(points, dtype=float)
    e = np.full(len(pts), float(energy))
    e[0] = math.inf
    return Topology(GridSpec(side, cells), pts, e, np.full(len(pts), 30.0))


def table_from_costs(cost):
    cost = np.asarray(cost, dtype=float)
    finite = np.isfinite(cost)
    return LinkCostTable(cost=cost, available_relays=finite.astype(int), rr_energy=np.where(finite, cost, 0.0),
                         feasible=finite)


def exhaustive_costs(cost, sink=0):
    """Cheapest simple path from every node to the sink, by enumeration."""
    n = len(cost)
    best = {sink: 0.0}
    others = [v for v in range(n) if v != sink]
    for u in others:
        rest = [v for v in others if v != u]
        for k in range(len(rest) + 1):
            for mid in itertools.permutations(rest, k):
                path = (u,) + mid + (sink,)
                c = route_cost(path, cost)
                if c < best.get(u, math.inf):
                    best[u] = c
    return best


def link_cost_oracle(topo, ch, model, params):
    """Relay count and request energy of every directed link, one pair at a time."""
    n = topo.n_nodes
    pos = topo.positions

    def dist(a, b):
        return math.dist(pos[a], pos[b])

    def eps(d):
        return float(dbm_to_w(required_tx_power_dbm(max(d, 1e-3), ch))) / model.rate_bps

    def reaches(a, b):
        return required_tx_power_dbm(max(dist(a, b), 1e-3), ch) <= topo.max_power_dbm[a] + 1e-12

    cost = np.full((n, n), math.inf)
    count = np.zeros((n, n), dtype=int)
    for i in range(1, n):
        for j in range(n):
            if i == j or not reaches(i, j):
                continue
            radius = dist(i, j) / params.delta_init
            resp = []
            for k in range(1, n):
                if k in (i, j) or dist(i, k) > radius:
                    continue
                if np.dot(pos[k] - pos[i], pos[j] - pos[i]) <= 0 or not reaches(k, j):
                    continue
                resp.append(k)
            count[i, j] = len(resp)
            rr = eps(radius) * model.gamma_rr + model.gamma_ack * sum(eps(dist(k, i)) for k in resp)
            if resp:
                cost[i, j] = rr / len(resp)
    return cost, count


class TestLinkCosts:
    LINE = [(10, 50), (70, 50), (100, 58), (104, 44), (96, 50), (160, 50)]

    def test_table_matches_pairwise_oracle(self):
        topo = topology(self.LINE)
        params = RelaySelectionParams(delta_init=1.5)
        table = build_link_costs(topo, CH200, MODEL, params)
        cost, count = link_cost_oracle(topo, CH200, MODEL, params)
        np.testing.assert_array_equal(table.available_relays, count)
        np.testing.assert_allclose(table.cost, cost, rtol=1e-12)
        assert table.available_relays[5, 0] == 4     # the dense middle serves 5 -> 0

    def test_no_relays_infinite(self):
        topo = topology([(10, 50), (60, 50)])
        table = build_link_costs(topo, CH200, MODEL, RelaySelectionParams())
        assert table.feasible[1, 0] and math.isinf(table.cost[1, 0])

    def test_cost_is_request_energy_per_relay(self):
        topo = topology(self.LINE)
        table = build_link_costs(topo, CH200, MODEL, RelaySelectionParams(delta_init=1.5))
        ok = np.isfinite(table.cost)
        np.testing.assert_allclose(table.cost[ok] * table.available_relays[ok], table.rr_energy[ok])

    def test_base_station_never_transmits(self):
        table = build_link_costs(topology(self.LINE), CH200, MODEL, RelaySelectionParams())
        assert not table.feasible[0].any()

    def test_dead_node_cut(self):
        topo = topology(self.LINE)
        e = np.array(topo.energy)
        e[4] = 0.0
        table = build_link_costs(topo.with_energy(e), CH200, MODEL, RelaySelectionParams(delta_init=1.5))
        assert not table.feasible[4].any() and not table.feasible[:, 4].any()


class TestShortestRoutes:
    def test_two_nodes(self):
        routes = shortest_routes(table_from_costs([[math.inf, math.inf], [2.0, math.inf]]))
        assert routes[1].hops == (1, 0) and routes[1].total_cost == 2.0

    def test_denser_longer_arm_wins(self):
        inf = math.inf
        # 1 -> 2 -> 0 (relay count 1 per link) versus 1 -> 3 -> 4 -> 0 (4 per link)
        c = np.full((5, 5), inf)
        c[1, 2] = c[2, 0] = 1.0
        c[1, 3] = c[3, 4] = c[4, 0] = 0.25
        routes = shortest_routes(table_from_costs(c))
        assert routes[1].hops == (1, 3, 4, 0)
        assert routes[1].total_cost == exhaustive_costs(c)[1]

    def test_unreachable_is_partitioned(self):
        c = np.full((3, 3), math.inf)
        c[1, 0] = 1.0
        routes = shortest_routes(table_from_costs(c))
        assert routes[2].partitioned and routes[2].hops == (2,) and routes[2].next_hop is None
        assert not routes[1].partitioned

    def test_tie_prefers_lower_next_hop(self):
        inf = math.inf
        c = np.full((4, 4), inf)
        c[3, 1] = c[3, 2] = 1.0
        c[1, 0] = c[2, 0] = 1.0
        assert shortest_routes(table_from_costs(c))[3].hops == (3, 1, 0)

    def test_equal_cost_fewer_hops(self):
        inf = math.inf
        c = np.full((4, 4), inf)
        c[3, 0] = 2.0
        c[3, 1] = c[1, 0] = 1.0
        assert shortest_routes(table_from_costs(c))[3].hops == (3, 0)

    @given(st.integers(2, 7), st.integers(0, 2 ** 32 - 1), st.floats(0.0, 0.8))
    @settings(max_examples=80, deadline=None)
    def test_matches_exhaustive_enumeration(self, n, seed, p_missing):
        rng = np.random.default_rng(seed)
        c = rng.choice([0.5, 1.0, 1.5, 2.0, 3.0], size=(n, n))
        c[rng.random((n, n)) < p_missing] = math.inf
        np.fill_diagonal(c, math.inf)
        routes = shortest_routes(table_from_costs(c))
        ref = exhaustive_costs(c)
        for u, r in routes.items():
            assert r.total_cost == ref.get(u, math.inf)
            if not r.partitioned:
                assert all(math.isfinite(c[a, b]) for a, b in zip(r.hops[:-1], r.hops[1:]))
                assert route_cost(r.hops, c) == r.total_cost

    def test_csv(self, tmp_path):
        c = np.full((3, 3), math.inf)
        c[1, 0], c[2, 1] = 1.0, 0.5
        routes_to_csv(shortest_routes(table_from_costs(c)), tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "node,next_hop,hops,total_cost,path"
        assert lines[3] == "2,1,2,1.5,2 1 0"


# one-hop cooperative trace: source 1 in cell 11 sends to the sink 0 in cell 8;
# relays 2 (cell 10) and 3 (cell 9), extra responder 4 (cell 7), seven rear nodes
TRACE_POINTS = [(20, 100), (170, 100), (120, 100), (95, 140), (150, 60)] + \
               [(190, y) for y in (10, 30, 50, 70, 130, 150, 170)]
TRACE_PARAMS = RelaySelectionParams(delta_init=1.5, delta_step=0.25, delta_min=1.25)


class TestDelivery:
    def test_cooperative_hop_ledger_by_hand(self):
        topo = topology(TRACE_POINTS)
        ledger = EvidenceLedger(topo.grid)
        route = {1: Route((1, 0), 1.0, ("cooperative",))}
        out = deliver_frame(1, route, topo, CH200, MODEL, TRACE_PARAMS, ledger)
        rep = out.reports[0]
        assert rep.mode == "cooperative" and rep.relays_used == 2
        expected = {
            (11, 10): 1 / 3 + 1 / 2, (11, 9): 1 / 3 + 1 / 2, (11, 7): 1 / 3,   # request, hand-off
            (10, 11): 1.0, (9, 11): 1.0, (7, 11): 1.0,                        # responder acks
            (11, 8): 1 / 3, (10, 8): 1 / 3, (9, 8): 1 / 3,                    # joint burst
            (8, 11): 1.0,                                                     # sink ack
        }
        assert set(ledger.link_counts) == set(expected)
        for k, v in expected.items():
            assert ledger[k] == pytest.approx(v)
        # the charges cover everything billed for the hop
        assert math.fsum(rep.charges.values()) == pytest.approx(rep.total_joules)
        assert set(rep.charges) == {0, 1, 2, 3, 4}

    def test_baseline_two_hops(self):
        topo = topology([(20, 100), (180, 100), (100, 100)])
        routes = {1: Route((1, 2, 0), 2.0)}
        ledger = EvidenceLedger(topo.grid)
        out = deliver_frame(1, routes, topo, CH200, MODEL, RelaySelectionParams(), ledger,
                            beamforming_enabled=False)
        assert [r.mode for r in out.reports] == ["baseline", "baseline"]
        assert ledger.total() == 2.0
        spent = np.array(topo.energy[1:]) - np.array(out.topology.energy[1:])
        assert spent[0] == pytest.approx(out.reports[0].total_joules)
        assert spent[1] == pytest.approx(out.reports[1].total_joules)

    def test_relays_on_first_hop_only(self):
        topo = topology([(20, 100), (190, 100), (110, 100), (150, 110), (140, 90)])
        routes = {1: Route((1, 2, 0), 2.0)}
        out = deliver_frame(1, routes, topo, CH200, MODEL, TRACE_PARAMS)
        assert [r.mode for r in out.reports] == ["cooperative", "failed-selection"]

    def test_short_of_energy_mid_route(self):
        topo = topology([(20, 100), (180, 100), (100, 100)])
        e = np.array(topo.energy)
        e[2] = 1e-9
        with pytest.raises(StaleRouteError) as info:
            deliver_frame(1, {1: Route((1, 2, 0), 2.0)}, topo.with_energy(e), CH200, MODEL,
                          RelaySelectionParams(), beamforming_enabled=False)
        err = info.value
        assert err.failed_node == 2 and len(err.reports) == 1
        assert err.topology.energy[1] < 5.0

    def test_dead_hop_node(self):
        topo = topology([(20, 100), (180, 100), (100, 100)])
        e = np.array(topo.energy)
        e[2] = 0.0
        with pytest.raises(StaleRouteError):
            deliver_frame(1, {1: Route((1, 2, 0), 2.0)}, topo.with_energy(e), CH200, MODEL,
                          RelaySelectionParams(), beamforming_enabled=False)

    def test_partitioned_source(self):
        topo = topology([(20, 100), (180, 100)])
        with pytest.raises(StaleRouteError):
            deliver_frame(1, {1: Route((1,), math.inf, (), True)}, topo, CH200, MODEL,
                          RelaySelectionParams())

    def test_seeded_csi_noise_repeatable(self):
        topo = topology(TRACE_POINTS)
        route = {1: Route((1, 0), 1.0)}
        a = deliver_frame(1, route, topo, CH200, MODEL, TRACE_PARAMS, seed=3, csi_noise_db=6.0)
        b = deliver_frame(1, route, topo, CH200, MODEL, TRACE_PARAMS, seed=3, csi_noise_db=6.0)
        assert a.total_joules == b.total_joules


# exponent-2 channel, 30 dBm reaches 100 m on its own
CH2 = ChannelModel(path_loss_exponent=2.0, reference_loss_db=calibrated_reference_loss(100.0, 30.0, 2.0, -100.0))


def cluster_topology(n_members, gap_m):
    pts = [(10, 250), (10 + gap_m, 250)] + [(10 + gap_m + 0.001 * (i + 1), 250) for i in range(n_members - 1)]
    return topology(pts, side=1000.0, cells=5)


class TestHealing:
    def test_single_member_within_range(self):
        topo = cluster_topology(1, 99.0)
        grp = heal_partition([1], topo, CH2, [0])
        assert grp is not None and grp.relays == () and grp.destination == 0

    def test_single_member_never_beyond_range(self):
        assert heal_partition([1], cluster_topology(1, 101.0), CH2, [0]) is None

    def test_ten_members_gain_ten_db(self):
        topo = cluster_topology(10, 100.0 * 10 ** 0.5 - 0.5)
        grp = heal_partition(range(1, 11), topo, CH2, [0])
        assert grp is not None and grp.size + 1 == 10

    def test_gap_beyond_gain(self):
        topo = cluster_topology(10, 100.0 * 10 ** 0.5 + 2.0)
        assert heal_partition(range(1, 11), topo, CH2, [0]) is None

    def test_fewest_members_target(self):
        # target 1 needs the whole group, target 2 only the closest member
        pts = [(10, 500), (10, 250), (400, 250), (320, 250), (330, 250)]
        topo = topology(pts, side=1000.0, cells=5)
        grp = heal_partition([3, 4], topo, CH2, [0, 1, 2])
        assert grp.destination == 2 and grp.source == 4 and grp.relays == ()

    def test_backoff_energy(self):
        topo = cluster_topology(4, 150.0)
        grp = heal_partition(range(1, 5), topo, CH2, [0], energy_model=MODEL)
        assert grp.size + 1 == 3            # 150 m needs 20 log10(1.5) = 3.5 dB, three members
        members = (grp.source,) + grp.relays
        per_w = [grp.eps[(m, 0)] * MODEL.rate_bps for m in members]
        assert max(per_w) <= 1.0 + 1e-12
        assert len(set(np.round(per_w, 15))) == 1

    def test_clusters(self):
        c = np.full((5, 5), math.inf)
        c[1, 0] = 1.0
        table = table_from_costs(c)
        feas = np.array(table.feasible)
        feas[2, 3] = feas[3, 2] = True
        table = LinkCostTable(table.cost, table.available_relays, table.rr_energy, feas)
        topo = topology([(10, 10), (20, 20), (150, 150), (160, 160), (100, 20)])
        routes = shortest_routes(table)
        assert partitioned_clusters(topo, table, routes) == [(2, 3), (4,)]
