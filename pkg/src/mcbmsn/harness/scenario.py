"""One seeded replication: topology, optimizer, frame traffic, adversary.

Every random draw comes from a PCG64 stream spawned off
``numpy.random.SeedSequence(seed)`` in a fixed order (placement, traffic,
mobility, fading, random power, CSI noise), so toggling beamforming or the
scheme never changes the topology, the traffic or the channel.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from ..adversary import EvidenceLedger, anonymity_report, belief
from ..beamforming import link_energy_per_bit
from ..exceptions import InfeasibleInstanceError, StaleRouteError
from ..optimizer import RadioInstance, evaluate, run_scheme, sinr_matrix, zipf_popularity
from ..routing import (build_link_costs, deliver_frame, heal_partition, partitioned_clusters,
                       shortest_routes)
from ..topology import BS_ID, Topology, build_grid, dbm_to_w, hata_urban_db, move_nodes
from .config import ScenarioConfig

_STREAMS = ("placement", "traffic", "mobility", "fading", "rpa", "csi")


def seed_streams(seed: int) -> dict[str, np.random.SeedSequence]:
    children = np.random.SeedSequence(int(seed)).spawn(len(_STREAMS))
    return dict(zip(_STREAMS, children))


@dataclass(frozen=True)
class MetricsRecord:
    """Per-replication outputs; CSV column order follows field order."""

    seed: int
    scheme: str
    beamforming: bool
    mean_frame_energy_j: float
    total_energy_j: float
    delivered_frames: int
    dropped_frames: int
    total_grid_power_w: float
    sum_rate_bps: float
    mean_user_throughput_bps: float
    backhaul_utilization_pct: float
    energy_efficiency_bpj: float
    served_users: int
    bs_belief: float
    argmax_correct: bool
    belief_mass: float
    partitioned_nodes: int
    heal_attempts: int
    heal_success: bool

    def as_row(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                out.append(str(int(v)))
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


METRIC_NAMES = tuple(f.name for f in fields(MetricsRecord)
                     if f.name not in ("seed", "scheme", "beamforming"))


def records_to_csv(records, path=None) -> str:
    """Serialise records (header plus one row each); writes ``path`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f.name for f in fields(MetricsRecord)])
    for r in records:
        w.writerow(r.as_row())
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# --------------------------------------------------------------------------
# Radio side
# --------------------------------------------------------------------------

def station_positions(config: ScenarioConfig, topology: Topology) -> np.ndarray:
    """Macro cell at the sink, then one small cell per configured grid cell."""
    grid = topology.grid
    small = [grid.cell_center(c) for c in config.optimizer.small_cells]
    return np.vstack([topology.positions[BS_ID][None, :]] + [np.asarray(s)[None, :] for s in small])


def build_radio_instance(config: ScenarioConfig, topology: Topology, fading_seed) -> RadioInstance:
    """Downlink from every station to every sensor."""
    o = config.optimizer
    stations = station_positions(config, topology)
    users = topology.positions[1:]
    n_small = len(o.small_cells)
    heights = np.array([o.macro_height_m] + [o.small_height_m] * n_small)
    d = np.hypot(*(stations[:, None, :] - users[None, :, :]).transpose(2, 0, 1))
    d = np.maximum(d, 10.0)
    loss = np.vstack([hata_urban_db(d[i], o.frequency_mhz, heights[i], o.user_height_m)
                      for i in range(len(stations))])
    gains = 10.0 ** (-np.maximum(loss, 0.0) / 10.0)
    if o.rayleigh_fading:
        gains = gains * np.random.default_rng(fading_seed).exponential(1.0, size=gains.shape)
        gains = np.maximum(gains, 1e-300)
    is_macro = np.zeros(1 + n_small, dtype=bool)
    is_macro[0] = True
    pmax = np.where(is_macro, dbm_to_w(o.macro_power_dbm), dbm_to_w(o.small_power_dbm))
    return RadioInstance(
        gains=gains, max_power_w=pmax, noise_w=float(dbm_to_w(o.noise_dbm)),
        bandwidth_hz=o.bandwidth_hz, bandwidth_share=o.bandwidth_share,
        min_sinr=10.0 ** (o.min_sinr_db / 10.0),
        cache_capacity=np.where(is_macro, o.macro_cache, o.small_cache),
        is_macro=is_macro, eta=o.eta,
        harvest_w=np.where(is_macro, o.macro_harvest_w, o.small_harvest_w),
        sharing_index=o.sharing_index,
        circuit_power_w=np.where(is_macro, o.macro_circuit_w, o.small_circuit_w),
    )


def served_users(instance: RadioInstance, policy: str) -> np.ndarray:
    """Users that meet the SINR floor at full power; aborts under ``"abort"``."""
    gamma = sinr_matrix(instance.max_power_w, instance)
    best = gamma.max(axis=0)
    ok = best >= instance.min_sinr
    if not ok.all() and policy == "abort":
        bad = np.flatnonzero(~ok)
        raise InfeasibleInstanceError(bad.tolist(), float(best[bad].min()), instance.min_sinr)
    return np.flatnonzero(ok)


# --------------------------------------------------------------------------
# Sensor traffic
# --------------------------------------------------------------------------

@dataclass
class TrafficOutcome:
    frame_energy: list
    total_energy_j: float
    dropped: int
    ledger: EvidenceLedger
    partitioned_nodes: int
    heal_attempts: int
    heal_failures: int


def _heal_frame(source, topology, channel, model, routes, cost_table, ledger):
    """Carry a frame out of a partition by a joint beam; returns (joules, target)."""
    clusters = partitioned_clusters(topology, cost_table, routes)
    cluster = next((c for c in clusters if source in c), (source,))
    connected = [u for u, r in routes.items() if not r.partitioned and topology.alive[u]]
    connected.append(BS_ID)
    group = heal_partition(cluster, topology, channel, connected, model)
    if group is None:
        return None
    members = (group.source,) + group.relays
    pos = topology.positions
    joules = {}
    # the source hands the frame to the other members, then all transmit together
    if group.relays:
        far = max(topology.distance(source, m) for m in group.relays)
        eps = float(link_energy_per_bit(max(far, 1e-3), channel, model))
        joules[source] = eps * (model.gamma_data + model.body_bits)
        if ledger is not None:
            ledger.record_multicast(pos[source], [pos[m] for m in group.relays])
    for m in members:
        joules[m] = joules.get(m, 0.0) + group.link(m, group.destination) * model.body_bits
    if ledger is not None:
        ledger.record_beam([pos[m] for m in members], pos[group.destination])
    return joules, group.destination


def simulate_traffic(config: ScenarioConfig, topology: Topology, streams, beamforming: bool
                     ) -> TrafficOutcome:
    """Deliver ``run.frames`` frames from pre-drawn sources to the sink."""
    channel = config.channel_model()
    model = config.energy_model()
    params = config.selection_params()
    mobility = config.mobility()
    t = config.topology
    frames = config.run.frames
    n = topology.n_nodes
    ledger = EvidenceLedger(topology.grid, config.adversary.evidence_mode)
    sources = np.random.default_rng(streams["traffic"]).integers(1, n, size=frames)
    mob_rng = np.random.default_rng(streams["mobility"])
    csi_rng = np.random.default_rng(streams["csi"])

    current = topology
    costs = build_link_costs(current, channel, model, params)
    routes = shortest_routes(costs, current)
    partitioned = {u for u, r in routes.items() if r.partitioned and u != BS_ID}
    frame_energy = []
    total = 0.0
    dropped = 0
    heal_attempts = heal_failures = 0

    for f, src in enumerate(sources):
        src = int(src)
        if f > 0 and t.mobility_interval_frames and f % t.mobility_interval_frames == 0:
            current = move_nodes(current, mobility, t.mobility_interval_frames * t.frame_interval_s,
                                 mob_rng)
            costs = build_link_costs(current, channel, model, params)
            routes = shortest_routes(costs, current)
            partitioned |= {u for u, r in routes.items() if r.partitioned and u != BS_ID}
        if not current.alive[src]:
            dropped += 1
            continue
        spent = 0.0
        start = src
        if routes[src].partitioned:
            if not beamforming:
                dropped += 1
                continue
            heal_attempts += 1
            healed = _heal_frame(src, current, channel, model, routes, costs, ledger)
            if healed is None:
                heal_failures += 1
                dropped += 1
                continue
            joules, start = healed
            energy = np.array(current.energy)
            for u, j in joules.items():
                energy[u] = max(energy[u] - j, 0.0)
            current = current.with_energy(energy)
            spent = math.fsum(joules.values())
        try:
            if start != BS_ID:
                out = deliver_frame(start, routes, current, channel, model, params, ledger,
                                    beamforming_enabled=beamforming, seed=csi_rng,
                                    csi_noise_db=config.relay.csi_noise_db)
                spent += out.total_joules
                current = out.topology
                if out.dead:
                    costs = build_link_costs(current, channel, model, params)
                    routes = shortest_routes(costs, current)
        except StaleRouteError as exc:
            spent += math.fsum(r.total_joules for r in exc.reports)
            if exc.topology is not None:
                current = exc.topology
            total += spent
            dropped += 1
            costs = build_link_costs(current, channel, model, params)
            routes = shortest_routes(costs, current)
            continue
        total += spent
        frame_energy.append(spent)
    return TrafficOutcome(frame_energy, total, dropped, ledger, len(partitioned), heal_attempts,
                          heal_failures)


# --------------------------------------------------------------------------
# Replication
# --------------------------------------------------------------------------

def run_scenario(config: ScenarioConfig, seed: int, scheme: Optional[str] = None,
                 beamforming: Optional[bool] = None) -> MetricsRecord:
    """One full replication for ``(config, seed)``.

    ``scheme`` and ``beamforming`` override the config's run section.  An
    instance where some sensor misses the SINR floor at full power raises
    :class:`InfeasibleInstanceError` unless the outage policy is ``"drop"``,
    in which case such sensors are left unserved.
    """
    scheme = config.run.scheme if scheme is None else scheme
    beamforming = config.run.beamforming if beamforming is None else beamforming
    streams = seed_streams(seed)
    t = config.topology
    o = config.optimizer
    topology = build_grid(t.n_nodes, t.side_m, t.cells_per_side, t.bs_cell, streams["placement"],
                          distribution=t.distribution, sensor_energy_j=t.sensor_energy_j,
                          sensor_max_power_dbm=t.sensor_max_power_dbm,
                          bs_max_power_dbm=t.bs_max_power_dbm, hotspot_count=t.hotspot_count,
                          hotspot_sigma_m=t.hotspot_sigma_m)

    # optimizer
    full = build_radio_instance(config, topology, streams["fading"])
    keep = served_users(full, o.outage_policy)
    catalog = zipf_popularity(o.file_count, o.zipf_alpha)
    if len(keep):
        inst = full.subset_users(keep)
        primal = run_scheme(scheme, inst, catalog, seed=streams["rpa"], max_iter=o.max_iter,
                            tol=o.tol, step0=o.step0, power_refinement=o.power_refinement)
        res = evaluate(scheme, primal, inst, catalog, o.backhaul_capacity_bps)
        grid_w, sum_rate, util, ee = (res.grid_power_w, res.sum_rate, res.backhaul_utilization,
                                      res.energy_efficiency)
    else:
        grid_w = sum_rate = util = ee = 0.0

    # sensor traffic and adversary
    traffic = simulate_traffic(config, topology, streams, beamforming)
    if traffic.ledger.total() > 0:
        bmap = belief(traffic.ledger, config.adversary.max_hops, topology.bs_cell)
        rep = anonymity_report(bmap, topology.bs_cell)
        bs_belief, correct, mass = bmap[topology.bs_cell], rep.argmax_cell == topology.bs_cell, bmap.mass_total
    else:
        bs_belief, correct, mass = 0.0, False, 0.0
    delivered = len(traffic.frame_energy)
    mean_e = math.fsum(traffic.frame_energy) / delivered if delivered else 0.0

    return MetricsRecord(
        seed=int(seed), scheme=scheme, beamforming=bool(beamforming),
        mean_frame_energy_j=float(mean_e), total_energy_j=float(traffic.total_energy_j),
        delivered_frames=delivered, dropped_frames=traffic.dropped,
        total_grid_power_w=float(grid_w), sum_rate_bps=float(sum_rate),
        mean_user_throughput_bps=float(sum_rate / full.n_users),
        backhaul_utilization_pct=float(util), energy_efficiency_bpj=float(ee),
        served_users=int(len(keep)), bs_belief=float(bs_belief), argmax_correct=bool(correct),
        belief_mass=float(mass), partitioned_nodes=traffic.partitioned_nodes,
        heal_attempts=traffic.heal_attempts, heal_success=traffic.heal_failures == 0,
    )
