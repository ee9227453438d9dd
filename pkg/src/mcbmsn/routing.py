"""Beam-aware routing and frame delivery.

A directed link costs the relay-request energy divided by the number of
relays it can recruit (infinite with none), so minimum-cost routes steer
traffic through relay-dense regions.  :func:`deliver_frame` walks a route
hop by hop, runs relay selection, charges every participant and feeds the
adversary ledger.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .adversary import EvidenceLedger
from .beamforming import (BeamGroup, EnergyModel, HopEnergyReport, RelaySelectionParams,
                          baseline_hop_energy, csi_from_channel, diban_hop_energy,
                          link_energy_per_bit, select_relays)
from .exceptions import StaleRouteError
from .topology import BS_ID, ChannelModel, Topology, dbm_to_w, required_tx_power_dbm

_MIN_DIST = 1e-3


@dataclass(frozen=True, eq=False)
class LinkCostTable:
    """Dense ``(n, n)`` tables indexed ``[tx, rx]``."""

    cost: np.ndarray
    available_relays: np.ndarray
    rr_energy: np.ndarray
    feasible: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.cost)


@dataclass(frozen=True)
class Route:
    hops: tuple[int, ...]
    total_cost: float
    per_hop_modes: tuple[str, ...] = ()
    partitioned: bool = False

    @property
    def next_hop(self) -> Optional[int]:
        return self.hops[1] if len(self.hops) > 1 else None


def _required_dbm_matrix(dist: np.ndarray, channel: ChannelModel) -> np.ndarray:
    return required_tx_power_dbm(np.maximum(dist, _MIN_DIST), channel)


def build_link_costs(topology: Topology, channel: ChannelModel, energy_model: EnergyModel,
                     selection_params: RelaySelectionParams) -> LinkCostTable:
    """Cost of every directed link under one expected relay-request round.

    A link is feasible when both ends are alive, the transmitter is a sensor
    and the required power is within its limit.  Relay availability uses the
    same responder rule as relay selection at the initial delta.
    """
    n = topology.n_nodes
    pos = topology.positions
    dist = topology.distances()
    p_req = _required_dbm_matrix(dist, channel)
    eps = dbm_to_w(p_req) / energy_model.rate_bps
    np.fill_diagonal(eps, 0.0)
    alive = topology.alive
    responder_ok = topology.energy > selection_params.energy_floor_j
    responder_ok[BS_ID] = False

    feasible = (p_req <= topology.max_power_dbm[:, None] + 1e-12) & alive[:, None] & alive[None, :]
    np.fill_diagonal(feasible, False)
    feasible[BS_ID, :] = False

    # reach[k, j]: node k can close a link to j on its own
    reach = p_req <= topology.max_power_dbm[:, None] + 1e-12
    radius = dist / selection_params.delta_init
    eps_sr = dbm_to_w(_required_dbm_matrix(radius, channel)) / energy_model.rate_bps

    count = np.zeros((n, n), dtype=int)
    ack_sum = np.zeros((n, n))
    for i in range(n):
        js = np.flatnonzero(feasible[i])
        if len(js) == 0:
            continue
        within = dist[i][:, None] <= radius[i, js][None, :]
        mask = within & responder_ok[:, None]
        if selection_params.forward_only:
            rel = pos - pos[i]
            mask &= (rel @ (pos[js] - pos[i]).T) > 0
        if selection_params.require_reach:
            mask &= reach[:, js]
        mask[i, :] = False
        mask[js, np.arange(len(js))] = False
        count[i, js] = mask.sum(axis=0)
        ack_sum[i, js] = eps[:, i] @ mask
    rr = eps_sr * energy_model.gamma_rr + energy_model.gamma_ack * ack_sum
    rr = np.where(feasible, rr, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = np.where(feasible & (count > 0), rr / np.maximum(count, 1), math.inf)
    return LinkCostTable(cost=cost, available_relays=count, rr_energy=rr, feasible=feasible)


def shortest_routes(cost_table: LinkCostTable, topology: Optional[Topology] = None,
                    sink: int = BS_ID) -> dict[int, Route]:
    """Minimum-cost route from every node to the sink.

    Labels are compared as (cost, hop count); among equal labels the lowest
    next-hop id wins.  Path costs are accumulated from the sink outwards.
    Nodes without a finite route get a one-node route flagged partitioned.
    """
    cost = cost_table.cost
    n = len(cost)
    best: dict[int, tuple[float, int]] = {sink: (0.0, 0)}
    nxt: dict[int, int] = {}
    done = set()
    heap = [(0.0, 0, sink)]
    while heap:
        c, h, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        preds = np.flatnonzero(np.isfinite(cost[:, v]))
        for u in preds:
            u = int(u)
            if u in done:
                continue
            cand = (float(cost[u, v]) + c, h + 1)
            old = best.get(u)
            if old is None or cand < old or (cand == old and v < nxt[u]):
                best[u] = cand
                nxt[u] = v
                heapq.heappush(heap, (cand[0], cand[1], u))

    routes: dict[int, Route] = {}
    for u in range(n):
        if u == sink:
            routes[u] = Route((sink,), 0.0, ())
        elif u in best:
            hops = [u]
            while hops[-1] != sink:
                hops.append(nxt[hops[-1]])
            modes = tuple("cooperative" if cost_table.available_relays[a, b] > 0 else "baseline"
                          for a, b in zip(hops[:-1], hops[1:]))
            routes[u] = Route(tuple(hops), best[u][0], modes)
        else:
            routes[u] = Route((u,), math.inf, (), partitioned=True)
    return routes


def route_cost(hops, cost: np.ndarray) -> float:
    """Path cost accumulated from the sink end, as :func:`shortest_routes` does."""
    total = 0.0
    for a, b in reversed(list(zip(hops[:-1], hops[1:]))):
        total = float(cost[a, b]) + total
    return total


def routes_to_csv(routes: Mapping[int, Route], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "next_hop", "hops", "total_cost", "path"])
        for u in sorted(routes):
            r = routes[u]
            w.writerow([u, "" if r.next_hop is None else r.next_hop, len(r.hops) - 1,
                        repr(r.total_cost), " ".join(map(str, r.hops))])


# --------------------------------------------------------------------------
# Delivery
# --------------------------------------------------------------------------

@dataclass
class FrameDelivery:
    reports: list[HopEnergyReport]
    topology: Topology
    dead: tuple[int, ...] = ()

    @property
    def total_joules(self) -> float:
        return math.fsum(r.total_joules for r in self.reports)


def _eps(topology: Topology, a: int, b: int, channel: ChannelModel, model: EnergyModel) -> float:
    return float(link_energy_per_bit(max(topology.distance(a, b), _MIN_DIST), channel, model))


def _cooperative_hop(s: int, d: int, topology: Topology, channel: ChannelModel,
                     model: EnergyModel, params: RelaySelectionParams,
                     ledger: Optional[EvidenceLedger], csi: Mapping[int, float]) -> HopEnergyReport:
    pos = topology.positions
    sel = select_relays(s, d, topology, channel, params, model, csi)
    charges: dict[int, float] = {}

    def charge(node, joules):
        charges[node] = charges.get(node, 0.0) + joules

    # every request round: the source's broadcast and each responder's ack
    for k, rnd in enumerate(sel.rounds):
        eps_sr = float(dbm_to_w(rnd.power_dbm)) / model.rate_bps
        final = bool(sel.relays) and k == len(sel.rounds) - 1
        if not final:
            charge(s, eps_sr * model.gamma_rr)
        for r in rnd.responders:
            if not (final and r in sel.relays):
                charge(r, _eps(topology, r, s, channel, model) * model.gamma_ack)
        if ledger is not None:
            ledger.record_multicast(pos[s], [pos[r] for r in rnd.responders])
            for r in rnd.responders:
                ledger.record(pos[r], pos[s])
    overhead = math.fsum(charges.values())

    eps_sd = _eps(topology, s, d, channel, model)
    if not sel.relays:
        data = baseline_hop_energy(eps_sd, model)
        charge(s, data)
        if ledger is not None:
            ledger.record(pos[s], pos[d])
        breakdown = {"selection_overhead": overhead, "data_source": data}
        return HopEnergyReport("failed-selection", math.fsum(charges.values()), breakdown, 0,
                               s, d, charges)

    eps = {(s, d): eps_sd, (d, s): _eps(topology, d, s, channel, model)}
    for r in sel.relays:
        eps[(s, r)] = _eps(topology, s, r, channel, model)
        eps[(r, s)] = _eps(topology, r, s, channel, model)
        eps[(r, d)] = _eps(topology, r, d, channel, model)
    group = BeamGroup(s, sel.relays, d, eps)
    rep = diban_hop_energy(group, model, overhead)
    # source-to-relay terms run at the mean per-relay link energy, as in the report
    eps_sr = float(np.mean([eps[(s, r)] for r in sel.relays]))
    share = model.body_bits / (len(sel.relays) + 1)
    charge(s, eps_sr * (model.gamma_rr + model.k_est_bits + model.gamma_data + model.body_bits)
           + eps_sd * share)
    for r in sel.relays:
        charge(r, eps[(r, s)] * model.gamma_ack + eps[(r, d)] * share)
    charge(d, eps[(d, s)] * model.gamma_ack)
    if ledger is not None:
        ledger.record_multicast(pos[s], [pos[r] for r in sel.relays])
        ledger.record_beam([pos[s]] + [pos[r] for r in sel.relays], pos[d])
        ledger.record(pos[d], pos[s])
    return HopEnergyReport(rep.mode, rep.total_joules, rep.breakdown, rep.relays_used, s, d, charges)


def deliver_frame(source: int, routes: Mapping[int, Route], topology: Topology,
                  channel: ChannelModel, energy_model: EnergyModel,
                  selection_params: RelaySelectionParams,
                  ledger: Optional[EvidenceLedger] = None, beamforming_enabled: bool = True,
                  seed=None, csi_noise_db: float = 0.0) -> FrameDelivery:
    """Carry one frame from ``source`` to the sink along its route.

    Energies are charged hop by hop.  If a hop node is already dead, or a
    participant cannot afford its share, :class:`StaleRouteError` is raised
    carrying the reports and topology of the hops completed so far.
    """
    route = routes[source]
    if route.partitioned:
        raise StaleRouteError(f"node {source} has no route", [], topology, source)
    rng = np.random.default_rng(seed)
    energy = np.array(topology.energy)
    reports: list[HopEnergyReport] = []
    current = topology
    for s, d in zip(route.hops[:-1], route.hops[1:]):
        if not (current.alive[s] and current.alive[d]):
            dead = s if not current.alive[s] else d
            raise StaleRouteError(f"hop {s}->{d}: node {dead} is dead", reports, current, dead)
        if beamforming_enabled:
            csi = csi_from_channel(current, d, channel, csi_noise_db, rng)
            rep = _cooperative_hop(s, d, current, channel, energy_model, selection_params,
                                   ledger, csi)
        else:
            eps_sd = _eps(current, s, d, channel, energy_model)
            data = baseline_hop_energy(eps_sd, energy_model)
            rep = HopEnergyReport("baseline", data, {"data_source": data}, 0, s, d, {s: data})
            if ledger is not None:
                ledger.record(current.positions[s], current.positions[d])
        short = [u for u, j in rep.charges.items() if energy[u] < j]
        if short:
            raise StaleRouteError(f"hop {s}->{d}: node {short[0]} cannot afford its share",
                                  reports, current, short[0])
        for u, j in rep.charges.items():
            energy[u] = max(energy[u] - j, 0.0)
        current = current.with_energy(energy)
        reports.append(rep)
    dead = tuple(int(i) for i in np.flatnonzero(~current.alive & topology.alive))
    return FrameDelivery(reports, current, dead)


# --------------------------------------------------------------------------
# Partitions
# --------------------------------------------------------------------------

def partitioned_clusters(topology: Topology, cost_table: LinkCostTable,
                         routes: Mapping[int, Route]) -> list[tuple[int, ...]]:
    """Groups of live partitioned sensors joined by feasible links."""
    cut = sorted(u for u, r in routes.items() if r.partitioned and topology.alive[u])
    cut_set = set(cut)
    link = cost_table.feasible | cost_table.feasible.T
    seen: set[int] = set()
    clusters = []
    for u in cut:
        if u in seen:
            continue
        comp, frontier = [], [u]
        seen.add(u)
        while frontier:
            v = frontier.pop()
            comp.append(v)
            for w in np.flatnonzero(link[v]):
                w = int(w)
                if w in cut_set and w not in seen:
                    seen.add(w)
                    frontier.append(w)
        clusters.append(tuple(sorted(comp)))
    return clusters


def heal_partition(cluster: Iterable[int], topology: Topology, channel: ChannelModel,
                   connected: Iterable[int], energy_model: Optional[EnergyModel] = None
                   ) -> Optional[BeamGroup]:
    """Try to bridge an isolated cluster to the connected network by a joint beam.

    Received powers add, so c co-located members at full power gain
    ``10 log10(c)`` dB over one.  For each connected target the strongest
    members are recruited until their sum closes the budget; the target
    needing the fewest members wins (then the larger margin, then the lower
    id).  Returns ``None`` when even the whole cluster falls short.  With
    ``energy_model`` the energy-per-bit entries assume every recruited
    member backs off by the group's common margin.
    """
    members = sorted(set(int(c) for c in cluster))
    targets = sorted(set(int(t) for t in connected) - set(members))
    if not members or not targets:
        return None
    pos = topology.positions
    thr = channel.rx_threshold_dbm
    best = None
    for t in targets:
        d = np.maximum(np.hypot(*(pos[members] - pos[t]).T), _MIN_DIST)
        rx_dbm = topology.max_power_dbm[members] - np.asarray(
            required_tx_power_dbm(d, channel)) + thr
        order = sorted(range(len(members)), key=lambda k: (-rx_dbm[k], members[k]))
        cum = np.cumsum(10.0 ** ((rx_dbm[order] - thr) / 10.0))
        hit = np.flatnonzero(10.0 * np.log10(cum) >= -1e-9)
        if len(hit) == 0:
            continue
        k = int(hit[0]) + 1
        margin = 10.0 * math.log10(float(cum[k - 1]))
        key = (k, -margin, t)
        if best is None or key < best[0]:
            best = (key, t, [members[i] for i in order[:k]], margin)
    if best is None:
        return None
    _, t, group, margin = best
    eps = {}
    if energy_model is not None:
        for m in group:
            p_dbm = topology.max_power_dbm[m] - max(margin, 0.0)
            eps[(m, t)] = float(dbm_to_w(p_dbm)) / energy_model.rate_bps
    return BeamGroup(group[0], tuple(group[1:]), t, eps)
