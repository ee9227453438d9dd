"""Cooperative (distributed) beamforming hop.

Power-domain model: |L| relays plus the source transmit the same frame,
each backing off by ``10 log10(|L|+1)`` dB, and their received powers add
at the destination.  Energy bookkeeping follows the cooperative-hop
formula (relay request, channel estimation, body hand-off, shared data
burst, relay and destination acknowledgements) and the per-round relay
request cost used by the routing metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .exceptions import ConfigError
from .topology import BS_ID, ChannelModel, Topology, dbm_to_w, path_loss_db, required_tx_power_dbm


@dataclass(frozen=True)
class EnergyModel:
    """Header sizes (bits), link rate (bit/s) and mean frame body (bits)."""

    gamma_rr: float = 64.0
    gamma_data: float = 128.0
    gamma_ack: float = 64.0
    k_est_bits: float = 25.0
    rate_bps: float = 250e3
    body_bits: float = 8192.0

    def __post_init__(self):
        for name in ("gamma_rr", "gamma_data", "gamma_ack", "k_est_bits", "rate_bps", "body_bits"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"energy.{name}", "must be > 0")

    @classmethod
    def from_estimation_time(cls, estimation_time_us: float, rate_bps: float, **kw) -> "EnergyModel":
        """Channel-estimation payload K = t x r."""
        return cls(k_est_bits=estimation_time_us * 1e-6 * rate_bps, rate_bps=rate_bps, **kw)


@dataclass(frozen=True)
class RelaySelectionParams:
    delta_init: float = 3.0
    delta_step: float = 0.25
    delta_min: float = 1.25
    max_rounds: int = 8
    energy_floor_j: float = 0.0
    forward_only: bool = True
    require_reach: bool = True

    def __post_init__(self):
        if not self.delta_min > 1:
            raise ConfigError("relay.delta_min", "must be > 1")
        if self.delta_init < self.delta_min:
            raise ConfigError("relay.delta_init", "must be >= delta_min")
        if not self.delta_step > 0:
            raise ConfigError("relay.delta_step", "must be > 0")
        if self.max_rounds < 1:
            raise ConfigError("relay.max_rounds", "must be >= 1")

    def schedule(self) -> list[float]:
        """Successive delta values, ending at delta_min or after max_rounds."""
        out = []
        for k in range(self.max_rounds):
            d = max(self.delta_init - k * self.delta_step, self.delta_min)
            out.append(d)
            if d <= self.delta_min:
                break
        return out


@dataclass(frozen=True)
class BeamGroup:
    """Source, ordered relay set and destination of one cooperative hop.

    ``eps`` maps a directed ``(tx, rx)`` node pair to its energy per bit.
    Entries needed: (S, D), (D, S) and, per relay R, (S, R), (R, S), (R, D).
    """

    source: int
    relays: tuple[int, ...]
    destination: int
    eps: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "relays", tuple(int(r) for r in self.relays))
        if self.source in self.relays or self.destination in self.relays:
            raise ValueError("source/destination cannot be relays")
        if len(set(self.relays)) != len(self.relays):
            raise ValueError("duplicate relay")

    @property
    def size(self) -> int:
        return len(self.relays)

    def link(self, tx: int, rx: int) -> float:
        try:
            return self.eps[(tx, rx)]
        except KeyError:
            raise KeyError(f"missing energy-per-bit entry for link {tx}->{rx}") from None


@dataclass(frozen=True)
class HopEnergyReport:
    mode: str
    total_joules: float
    breakdown: Mapping[str, float]
    relays_used: int
    source: int = -1
    destination: int = -1
    charges: Mapping[int, float] = field(default_factory=dict)


def combining_gain_db(num_relays: int) -> float:
    if num_relays < 0:
        raise ValueError("num_relays must be >= 0")
    return 10.0 * math.log10(num_relays + 1)


def received_power_w(per_node_tx_w: Sequence[float], gains: Sequence[float]) -> float:
    """Destination power with ideal phase alignment: received powers add."""
    p = np.asarray(per_node_tx_w, dtype=float)
    g = np.asarray(gains, dtype=float)
    if np.any(p < 0):
        raise ValueError("transmit powers must be >= 0")
    return float(np.sum(p * g))


def energy_per_bit(mean_tx_power_w: float, rate_bps: float) -> float:
    if not rate_bps > 0:
        raise ValueError("rate must be > 0")
    if mean_tx_power_w < 0:
        raise ValueError("power must be >= 0")
    return mean_tx_power_w / rate_bps


def link_energy_per_bit(distance_m, channel: ChannelModel, model: EnergyModel):
    """Energy per bit of a link run at exactly its required power."""
    return dbm_to_w(required_tx_power_dbm(distance_m, channel)) / model.rate_bps


def baseline_hop_energy(eps_b_sd: float, model: EnergyModel) -> float:
    return eps_b_sd * model.body_bits


def relay_request_energy(eps_b_sr: float, responders, retransmission_rounds: int,
                         model: EnergyModel) -> float:
    """Relay-request cost summed over rounds.

    ``responders`` is either a count (every responder acknowledging at
    ``eps_b_sr``) or, per round, a sequence of responder energies per bit.
    With a count, the same round is repeated ``retransmission_rounds`` times.
    """
    if retransmission_rounds < 1:
        raise ValueError("need at least one round")
    if np.isscalar(responders):
        if responders < 0:
            raise ValueError("responders must be >= 0")
        per_round = eps_b_sr * model.gamma_rr + model.gamma_ack * responders * eps_b_sr
        return retransmission_rounds * per_round
    rounds = list(responders)
    if len(rounds) != retransmission_rounds:
        raise ValueError("one responder list per round expected")
    return sum(eps_b_sr * model.gamma_rr + model.gamma_ack * float(np.sum(r)) for r in rounds)


def diban_hop_energy(group: BeamGroup, model: EnergyModel, overhead_j: float = 0.0) -> HopEnergyReport:
    """Energy of one cooperative hop, term by term.

    The source's broadcast term uses the mean source-to-relay energy per bit;
    relay terms are summed per relay, which equals the ``|L|``-scaled form
    when the relays are homogeneous.  With no relays the hop is an ordinary
    transmission and ``overhead_j`` (wasted relay-request rounds) is added.
    """
    s, d, relays = group.source, group.destination, group.relays
    n = len(relays)
    eps_sd = group.link(s, d)
    if n == 0:
        data = baseline_hop_energy(eps_sd, model)
        breakdown = {"selection_overhead": overhead_j, "data_source": data}
        return HopEnergyReport("baseline", data + overhead_j, breakdown, 0, s, d)

    eps_sr = float(np.mean([group.link(s, r) for r in relays]))
    share = model.body_bits / (n + 1)
    breakdown = {
        "selection_overhead": overhead_j,
        "relay_request": eps_sr * model.gamma_rr,
        "channel_estimation": eps_sr * model.k_est_bits,
        "data_handoff": eps_sr * (model.gamma_data + model.body_bits),
        "data_source": eps_sd * share,
        "data_relays": sum(group.link(r, d) for r in relays) * share,
        "relay_acks": sum(group.link(r, s) for r in relays) * model.gamma_ack,
        "destination_ack": group.link(d, s) * model.gamma_ack,
    }
    return HopEnergyReport("cooperative", math.fsum(breakdown.values()), breakdown, n, s, d)


def expected_candidates(density_lambda: float, d_sd_m: float, delta: float) -> float:
    """Expected relay count in the request region of radius ``d_sd / delta``."""
    if not delta > 1:
        raise ValueError("delta must be > 1: delta = 1 would expose the direct link")
    if not d_sd_m > 0:
        raise ValueError("distance must be > 0")
    d_sr = d_sd_m / delta
    return density_lambda * math.pi * d_sr ** 2 / 8.0


# --------------------------------------------------------------------------
# Relay selection
# --------------------------------------------------------------------------

def responder_mask(topology: Topology, source: int, dest: int, radius_m: float,
                   params: RelaySelectionParams, channel: Optional[ChannelModel] = None) -> np.ndarray:
    """Nodes that answer a relay request broadcast over ``radius_m``.

    A responder is alive above the energy floor, inside the radius, not the
    source, destination or base station, and (by default) lies in the
    half-plane facing the destination and can itself reach the destination.
    """
    pos = topology.positions
    s, d = pos[source], pos[dest]
    rel = pos - s
    mask = np.hypot(rel[:, 0], rel[:, 1]) <= radius_m
    mask &= topology.energy > params.energy_floor_j
    mask[[source, dest, BS_ID]] = False
    if params.forward_only:
        mask &= rel @ (d - s) > 0
    if params.require_reach and channel is not None and mask.any():
        idx = np.flatnonzero(mask)
        to_d = np.hypot(*(pos[idx] - d).T)
        ok = np.zeros(len(idx), dtype=bool)
        pos_d = to_d > 0
        ok[pos_d] = required_tx_power_dbm(to_d[pos_d], channel) <= topology.max_power_dbm[idx][pos_d] + 1e-12
        mask[idx[~ok]] = False
    return mask


def csi_from_channel(topology: Topology, dest: int, channel: ChannelModel,
                     noise_db: float = 0.0, rng=None) -> dict[int, float]:
    """CSI quality of every node towards ``dest``: minus path loss plus noise."""
    pos = topology.positions
    dist = np.maximum(np.hypot(*(pos - pos[dest]).T), 1e-9)
    q = -np.asarray(path_loss_db(dist, channel))
    if noise_db > 0:
        q = q + np.random.default_rng(rng).normal(0.0, noise_db, size=len(q))
    return {i: float(v) for i, v in enumerate(q)}


@dataclass(frozen=True)
class SelectionRound:
    delta: float
    radius_m: float
    power_dbm: float
    responders: tuple[int, ...]


@dataclass(frozen=True)
class RelaySelection:
    relays: tuple[int, ...]
    target: int
    rounds: tuple[SelectionRound, ...]
    energy_j: float
    direct_power_dbm: float

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    @property
    def mode(self) -> str:
        return "cooperative" if self.relays else "failed-selection"


def _rank_by_csi(candidates: Sequence[int], csi: Mapping[int, float]) -> list[int]:
    return sorted(candidates, key=lambda r: (-csi.get(r, -math.inf), r))


def select_relays(source: int, dest: int, topology: Topology, channel: ChannelModel,
                  params: RelaySelectionParams, model: EnergyModel,
                  csi_quality: Optional[Mapping[int, float]] = None) -> RelaySelection:
    """Iterative relay recruitment for one hop.

    The target count comes from the node density and the initial delta.
    Each round broadcasts a relay request over ``d_SD / delta``; too few
    responders shrink delta by one step (wider broadcast) until delta_min,
    where selection gives up with no relays.  With enough responders the
    best ``target`` by CSI quality are kept (ties: lowest id).  The request
    power always stays strictly below the direct-link power.
    """
    if source == dest:
        raise ValueError("source and destination must differ")
    d_sd = topology.distance(source, dest)
    p_direct = required_tx_power_dbm(d_sd, channel)
    target = math.ceil(expected_candidates(topology.density, d_sd, params.delta_init) - 1e-12)
    if csi_quality is None:
        csi_quality = csi_from_channel(topology, dest, channel)
    pos = topology.positions

    rounds = []
    energy = 0.0
    relays: tuple[int, ...] = ()
    for delta in params.schedule():
        radius = d_sd / delta
        p_req = required_tx_power_dbm(radius, channel)
        if not p_req < p_direct:
            break
        mask = responder_mask(topology, source, dest, radius, params, channel)
        responders = tuple(int(i) for i in np.flatnonzero(mask))
        rounds.append(SelectionRound(delta, radius, float(p_req), responders))
        eps_sr = dbm_to_w(p_req) / model.rate_bps
        if responders:
            back = np.hypot(*(pos[list(responders)] - pos[source]).T)
            acks = link_energy_per_bit(np.maximum(back, 1e-9), channel, model)
        else:
            acks = np.zeros(0)
        energy += relay_request_energy(eps_sr, [acks], 1, model)
        if len(responders) >= target:
            relays = tuple(_rank_by_csi(responders, csi_quality)[:target])
            break
    return RelaySelection(relays, target, tuple(rounds), energy, float(p_direct))
