import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcbmsn.beamforming import (BeamGroup, EnergyModel, RelaySelectionParams, baseline_hop_energy,
                                combining_gain_db, csi_from_channel, diban_hop_energy,
                                energy_per_bit, expected_candidates, link_energy_per_bit,
                                received_power_w, relay_request_energy, responder_mask,
                                select_relays)
from mcbmsn.exceptions import ConfigError
from mcbmsn.topology import ChannelModel, GridSpec, Topology

MODEL = EnergyModel()


def uniform_group(n_relays, e):
    relays = tuple(range(2, 2 + n_relays))
    eps = {(0, 1): e, (1, 0): e}
    for r in relays:
        eps.update({(0, r): e, (r, 0): e, (r, 1): e})
    return BeamGroup(0, relays, 1, eps)


def make_topology(points, side=100.0, energy=5.0):
    pts = np.asarray(points, dtype=float)
    e = np.full(len(pts), energy)
    e[0] = math.inf
    return Topology(GridSpec(side, 2), pts, e, np.full(len(pts), 30.0))


class TestCombining:
    @pytest.mark.parametrize("n, db", [(0, 0.0), (9, 10.0), (3, 10 * math.log10(4))])
    def test_gain(self, n, db):
        assert combining_gain_db(n) == pytest.approx(db, abs=1e-12)

    def test_gain_rejects_negative(self):
        with pytest.raises(ValueError):
            combining_gain_db(-1)

    def test_single_link(self):
        assert received_power_w([1.0], [1e-6]) == pytest.approx(1e-6)

    def test_split_power_conserved(self):
        assert received_power_w([0.25] * 4, [1e-6] * 4) == pytest.approx(1e-6)

    def test_unequal_gains_add_powers(self):
        p, g = [0.5, 0.2, 0.3], [1e-6, 4e-6, 2e-7]
        assert received_power_w(p, g) == pytest.approx(0.5e-6 + 0.8e-6 + 0.06e-6)

    @given(st.integers(0, 16), st.floats(1e-3, 10.0), st.floats(1e-12, 1e-3))
    def test_backoff_matches_gain(self, n, p, g):
        # each node backs off by the combining gain; total received is unchanged
        per_node = p * 10 ** (-combining_gain_db(n) / 10)
        assert received_power_w([per_node] * (n + 1), [g] * (n + 1)) == pytest.approx(p * g, rel=1e-9)


class TestEnergyTerms:
    @pytest.mark.parametrize("p, r, e", [(1.0, 1e6, 1e-6), (0.0, 1e6, 0.0), (0.5, 250e3, 2e-6)])
    def test_energy_per_bit(self, p, r, e):
        assert energy_per_bit(p, r) == pytest.approx(e)

    def test_energy_per_bit_rejects(self):
        with pytest.raises(ValueError):
            energy_per_bit(1.0, 0.0)

    def test_baseline_product(self):
        m = EnergyModel(body_bits=1000.0)
        assert baseline_hop_energy(1e-6, m) == pytest.approx(1e-3)
        assert baseline_hop_energy(0.0, m) == 0.0

    def test_baseline_composed_by_hand(self):
        ch = ChannelModel(reference_loss_db=45.05, tx_loss_db=3, rx_loss_db=3, backoff_db=1.5,
                          margin_db=5)
        loss = 45.05 + 30.0 * math.log10(146.7)
        p_w = 10 ** ((-100.0 + 12.5 + loss - 30.0) / 10)
        expected = p_w / 250e3 * MODEL.body_bits
        eps = float(link_energy_per_bit(146.7, ch, MODEL))
        assert baseline_hop_energy(eps, MODEL) == pytest.approx(expected, rel=1e-12)

    def test_estimation_bits_from_time(self):
        m = EnergyModel.from_estimation_time(100.0, 250e3)
        assert m.k_est_bits == pytest.approx(25.0)

    def test_invalid_model(self):
        with pytest.raises(ConfigError):
            EnergyModel(rate_bps=0.0)


class TestRelayRequest:
    def test_no_responders(self):
        assert relay_request_energy(2e-6, 0, 1, MODEL) == pytest.approx(2e-6 * MODEL.gamma_rr)

    def test_two_responders(self):
        e = 2e-6
        assert relay_request_energy(e, 2, 1, MODEL) == pytest.approx(e * MODEL.gamma_rr + 2 * e * MODEL.gamma_ack)

    def test_rounds_scale_linearly(self):
        one = relay_request_energy(1e-6, 4, 1, MODEL)
        assert relay_request_energy(1e-6, 4, 3, MODEL) == pytest.approx(3 * one)

    def test_per_round_lists(self):
        got = relay_request_energy(1e-6, [[1e-6, 3e-6], []], 2, MODEL)
        assert got == pytest.approx(2e-6 * MODEL.gamma_rr + 4e-6 * MODEL.gamma_ack)

    def test_bad_rounds(self):
        with pytest.raises(ValueError):
            relay_request_energy(1e-6, 1, 0, MODEL)
        with pytest.raises(ValueError):
            relay_request_energy(1e-6, [[1e-6]], 2, MODEL)


class TestCooperativeHop:
    def test_single_relay_by_hand(self):
        e = 3e-7
        rep = diban_hop_energy(uniform_group(1, e), MODEL)
        m = MODEL
        expected = e * (m.gamma_rr + m.k_est_bits + m.gamma_data + m.body_bits) + e * m.body_bits + 2 * e * m.gamma_ack
        assert rep.mode == "cooperative"
        assert rep.total_joules == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("n", range(1, 11))
    def test_data_terms_independent_of_group_size(self, n):
        e = 1.7e-7
        b = diban_hop_energy(uniform_group(n, e), MODEL).breakdown
        assert b["data_source"] + b["data_relays"] == pytest.approx(e * MODEL.body_bits, rel=1e-12)

    def test_no_relays_is_baseline_plus_overhead(self):
        grp = BeamGroup(0, (), 1, {(0, 1): 2e-6})
        rep = diban_hop_energy(grp, MODEL, overhead_j=1e-4)
        assert rep.mode == "baseline"
        assert rep.total_joules == pytest.approx(2e-6 * MODEL.body_bits + 1e-4)

    def test_heterogeneous_relays_sum_per_relay(self):
        eps = {(0, 1): 1e-6, (1, 0): 1e-6, (0, 2): 1e-7, (2, 0): 1e-7, (2, 1): 5e-7,
               (0, 3): 3e-7, (3, 0): 3e-7, (3, 1): 2e-7}
        b = diban_hop_energy(BeamGroup(0, (2, 3), 1, eps), MODEL).breakdown
        third = MODEL.body_bits / 3
        assert b["data_relays"] == pytest.approx((5e-7 + 2e-7) * third)
        assert b["relay_acks"] == pytest.approx(4e-7 * MODEL.gamma_ack)
        assert b["relay_request"] == pytest.approx(2e-7 * MODEL.gamma_rr)

    def test_missing_link_named(self):
        with pytest.raises(KeyError, match="2->1"):
            diban_hop_energy(BeamGroup(0, (2,), 1, {(0, 1): 1e-6, (1, 0): 1e-6, (0, 2): 1e-6}), MODEL)

    def test_group_validation(self):
        with pytest.raises(ValueError):
            BeamGroup(0, (1,), 1)
        with pytest.raises(ValueError):
            BeamGroup(0, (2, 2), 1)


class TestExpectedCandidates:
    def test_example(self):
        assert expected_candidates(0.001, 200.0, 2.0) == pytest.approx(0.001 * math.pi * 100 ** 2 / 8)

    def test_zero_density(self):
        assert expected_candidates(0.0, 200.0, 2.0) == 0.0

    @given(st.floats(1.01, 50.0), st.floats(1.01, 50.0))
    def test_decreasing_in_delta(self, a, b):
        lo, hi = sorted((a, b))
        assert expected_candidates(0.01, 150.0, hi) <= expected_candidates(0.01, 150.0, lo)

    def test_delta_one_rejected(self):
        with pytest.raises(ValueError):
            expected_candidates(0.01, 100.0, 1.0)


class TestSchedule:
    def test_ends_at_floor(self):
        p = RelaySelectionParams(delta_init=2.0, delta_step=0.25, delta_min=1.25)
        assert p.schedule() == [2.0, 1.75, 1.5, 1.25]

    def test_round_cap(self):
        assert len(RelaySelectionParams(delta_init=3.0, delta_step=0.1, max_rounds=4).schedule()) == 4

    def test_invalid(self):
        with pytest.raises(ConfigError):
            RelaySelectionParams(delta_min=1.0)


# source at (10, 10), destination at (80, 80); five forward neighbours inside
# the first request radius and filler nodes far from the source
SRC, DST = 1, 2
NEAR = [(25, 20), (20, 28), (30, 30), (15, 35), (33, 18)]
FILLER = [(95, 5 + 4 * i) for i in range(22)]
CH = ChannelModel(reference_loss_db=45.05)


def selection_topology():
    return make_topology([(50, 50), (10, 10), (80, 80)] + NEAR + FILLER)


class TestSelection:
    def test_top_csi_pair_matches_exhaustive(self):
        topo = selection_topology()
        params = RelaySelectionParams()
        csi = {i: -float(i) for i in range(topo.n_nodes)}
        csi.update({3: 1.0, 4: 5.0, 5: 2.0, 6: 4.0, 7: 3.0})
        sel = select_relays(SRC, DST, topo, CH, params, MODEL, csi)
        assert sel.target == 2
        assert sel.n_rounds == 1
        assert set(sel.rounds[0].responders) == {3, 4, 5, 6, 7}
        best = max(itertools.combinations(sel.rounds[0].responders, 2),
                   key=lambda pair: sum(csi[r] for r in pair))
        assert set(sel.relays) == set(best) == {4, 6}

    def test_isolated_source_fails(self):
        topo = make_topology([(50, 50), (10, 10), (80, 80), (95, 0), (0, 95)])
        sel = select_relays(SRC, DST, topo, CH, RelaySelectionParams(), MODEL)
        assert sel.relays == ()
        assert sel.mode == "failed-selection"
        assert sel.n_rounds == len(RelaySelectionParams().schedule())
        assert sel.energy_j > 0

    def test_request_power_below_direct(self):
        sel = select_relays(SRC, DST, selection_topology(), CH, RelaySelectionParams(), MODEL)
        assert all(r.power_dbm < sel.direct_power_dbm for r in sel.rounds)

    def test_responders_exclude_endpoints_and_sink(self):
        topo = selection_topology()
        mask = responder_mask(topo, SRC, DST, 1000.0, RelaySelectionParams(forward_only=False), CH)
        assert not mask[[0, SRC, DST]].any()

    def test_forward_only_drops_rear_nodes(self):
        topo = make_topology([(50, 50), (40, 40), (90, 90), (30, 35), (45, 50)])
        fwd = responder_mask(topo, 1, 2, 20.0, RelaySelectionParams(), CH)
        both = responder_mask(topo, 1, 2, 20.0, RelaySelectionParams(forward_only=False), CH)
        assert fwd.tolist() == [False, False, False, False, True]
        assert both.tolist() == [False, False, False, True, True]

    def test_energy_floor(self):
        topo = selection_topology()
        e = np.array(topo.energy)
        e[4] = 0.0
        mask = responder_mask(topo.with_energy(e), SRC, DST, 40.0, RelaySelectionParams(), CH)
        assert not mask[4]

    def test_csi_noise_reproducible(self):
        topo = selection_topology()
        a = csi_from_channel(topo, DST, CH, noise_db=3.0, rng=5)
        b = csi_from_channel(topo, DST, CH, noise_db=3.0, rng=5)
        assert a == b
        clean = csi_from_channel(topo, DST, CH)
        # (30, 30) is closer to the destination than (25, 20)
        assert clean[5] > clean[3]
