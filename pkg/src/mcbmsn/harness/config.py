"""Scenario configuration: YAML schema, defaults and validation.

A config file is a YAML mapping with a ``format: mcbmsn/1`` tag and up to
seven sections (``topology``, ``channel``, ``energy``, ``relay``,
``adversary``, ``optimizer``, ``run``).  Every key is optional; missing
keys take the defaults below and unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import yaml

from ..beamforming import EnergyModel, RelaySelectionParams
from ..exceptions import ConfigError
from ..topology import ChannelModel, RandomWaypoint

FORMAT_TAG = "mcbmsn/1"
SCHEMES = ("MCB-MSN", "FPA", "RPA")


@dataclass(frozen=True)
class TopologyConfig:
    n_nodes: int = 100                 # total nodes, base station included
    side_m: float = 880.0
    cells_per_side: int = 6
    bs_cell: int = 35
    distribution: str = "uniform"      # uniform | hotspot
    hotspot_count: int = 3
    hotspot_sigma_m: float = 60.0
    sensor_energy_j: float = 5.0
    sensor_max_power_dbm: float = 30.0
    bs_max_power_dbm: float = 43.0
    mobility_interval_frames: int = 10  # 0 disables mobility
    frame_interval_s: float = 1.0
    speed_min_mps: float = 0.5
    speed_max_mps: float = 2.0
    pause_s: float = 0.0


@dataclass(frozen=True)
class ChannelConfig:
    model_kind: str = "log-distance"
    path_loss_exponent: float = 3.0
    reference_loss_db: float = 45.05  # 30 dBm reaches 260 m after the link-budget losses
    frequency_mhz: float = 900.0
    bs_height_m: float = 30.0
    ms_height_m: float = 1.5
    noise_power_w: float = 1e-15
    bandwidth_hz: float = 250e3
    rx_sensitivity_dbm: float = -100.0
    min_snr_db: float = 10.0
    tx_loss_db: float = 3.0
    rx_loss_db: float = 3.0
    backoff_db: float = 1.5
    margin_db: float = 5.0


@dataclass(frozen=True)
class EnergyConfig:
    gamma_rr_bits: float = 64.0
    gamma_data_bits: float = 128.0
    gamma_ack_bits: float = 64.0
    estimation_bits: float = 25.0
    rate_bps: float = 250e3
    body_bits: float = 8192.0


@dataclass(frozen=True)
class RelayConfig:
    delta_init: float = 3.0
    delta_step: float = 0.25
    delta_min: float = 1.25
    max_rounds: int = 8
    energy_floor_j: float = 0.0
    forward_only: bool = True
    require_reach: bool = True
    csi_noise_db: float = 0.0


@dataclass(frozen=True)
class AdversaryConfig:
    max_hops: int = 4
    evidence_mode: str = "fractional"  # fractional | binary


@dataclass(frozen=True)
class OptimizerConfig:
    small_cells: tuple = (0, 5, 7, 10, 14, 25, 28, 30)
    macro_power_dbm: float = 43.0
    small_power_dbm: float = 30.0
    macro_height_m: float = 30.0
    small_height_m: float = 10.0
    user_height_m: float = 1.5
    frequency_mhz: float = 900.0
    rayleigh_fading: bool = True
    file_count: int = 50
    zipf_alpha: float = 1.0
    macro_cache: int = 40
    small_cache: int = 20
    min_sinr_db: float = -10.0
    noise_dbm: float = -95.0
    bandwidth_hz: float = 10e6
    bandwidth_share: float = 1.0
    eta: float = 0.01
    sharing_index: float = 0.8
    macro_harvest_w: float = 0.0
    small_harvest_w: float = 0.5
    macro_circuit_w: float = 10.0
    small_circuit_w: float = 1.0
    backhaul_capacity_bps: float = 50e6
    max_iter: int = 2000
    tol: float = 1e-6
    step0: float = 0.1
    power_refinement: bool = False
    outage_policy: str = "abort"       # abort | drop


@dataclass(frozen=True)
class RunConfig:
    frames: int = 50
    replications: int = 30
    seed_base: int = 0
    beamforming: bool = True
    scheme: str = "MCB-MSN"
    schemes: tuple = SCHEMES
    codec: str = "adaptive-multi-rate"        # recorded only
    fairness_index: str = "security-throughput"  # recorded only


@dataclass(frozen=True)
class ScenarioConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    relay: RelayConfig = field(default_factory=RelayConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    run: RunConfig = field(default_factory=RunConfig)

    # -- component builders ------------------------------------------------

    def channel_model(self) -> ChannelModel:
        return ChannelModel(**dataclasses.asdict(self.channel))

    def energy_model(self) -> EnergyModel:
        e = self.energy
        return EnergyModel(gamma_rr=e.gamma_rr_bits, gamma_data=e.gamma_data_bits,
                           gamma_ack=e.gamma_ack_bits, k_est_bits=e.estimation_bits,
                           rate_bps=e.rate_bps, body_bits=e.body_bits)

    def selection_params(self) -> RelaySelectionParams:
        r = self.relay
        return RelaySelectionParams(r.delta_init, r.delta_step, r.delta_min, r.max_rounds,
                                    r.energy_floor_j, r.forward_only, r.require_reach)

    def mobility(self) -> RandomWaypoint:
        t = self.topology
        return RandomWaypoint(t.speed_min_mps, t.speed_max_mps, t.pause_s)

    # -- helpers -----------------------------------------------------------

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"format": FORMAT_TAG}
        for f in fields(self):
            sec = dataclasses.asdict(getattr(self, f.name))
            out[f.name] = {k: list(v) if isinstance(v, tuple) else v for k, v in sec.items()}
        return out

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_values(self, **dotted) -> "ScenarioConfig":
        """Copy with ``section__key=value`` overrides, revalidated."""
        data = self.to_dict()
        for key, value in dotted.items():
            sec, _, name = key.partition("__")
            if sec not in data or not name:
                raise ConfigError(key, "override must be section__key")
            data[sec][name] = value
        return from_dict(data)


_SECTION_TYPES = {
    "topology": TopologyConfig, "channel": ChannelConfig, "energy": EnergyConfig,
    "relay": RelayConfig, "adversary": AdversaryConfig, "optimizer": OptimizerConfig,
    "run": RunConfig,
}


def _coerce(path: str, default, value, line):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}", line)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}", line)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}", line)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}", line)
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {value!r}", line)
        return tuple(value)
    return value


def _validate(cfg: ScenarioConfig, lines: dict[str, int]) -> None:
    def bad(path, msg):
        raise ConfigError(path, msg, lines.get(path))

    t = cfg.topology
    if t.n_nodes < 2:
        bad("topology.n_nodes", "needs at least 2 nodes (one sensor plus the base station)")
    if not t.side_m > 0:
        bad("topology.side_m", "must be > 0")
    if t.cells_per_side < 1:
        bad("topology.cells_per_side", "must be >= 1")
    n_cells = t.cells_per_side ** 2
    if not 0 <= t.bs_cell < n_cells:
        bad("topology.bs_cell", f"must lie in [0, {n_cells})")
    if t.distribution not in ("uniform", "hotspot"):
        bad("topology.distribution", "must be 'uniform' or 'hotspot'")
    if t.hotspot_count < 1:
        bad("topology.hotspot_count", "must be >= 1")
    if t.sensor_energy_j < 0:
        bad("topology.sensor_energy_j", "must be >= 0")
    if t.mobility_interval_frames < 0:
        bad("topology.mobility_interval_frames", "must be >= 0")
    if not t.frame_interval_s > 0:
        bad("topology.frame_interval_s", "must be > 0")
    if t.speed_min_mps < 0 or t.speed_max_mps < t.speed_min_mps:
        bad("topology.speed_max_mps", "need 0 <= speed_min_mps <= speed_max_mps")

    c = cfg.channel
    if c.model_kind not in ("log-distance", "okumura-hata"):
        bad("channel.model_kind", "must be 'log-distance' or 'okumura-hata'")
    if c.model_kind == "log-distance" and c.path_loss_exponent < 2:
        bad("channel.path_loss_exponent", "must be >= 2")
    for name in ("noise_power_w", "bandwidth_hz", "frequency_mhz", "bs_height_m", "ms_height_m"):
        if not getattr(c, name) > 0:
            bad(f"channel.{name}", "must be > 0")

    for f in fields(cfg.energy):
        if not getattr(cfg.energy, f.name) > 0:
            bad(f"energy.{f.name}", "must be > 0")

    r = cfg.relay
    if not r.delta_min > 1:
        bad("relay.delta_min", "must be > 1")
    if r.delta_init < r.delta_min:
        bad("relay.delta_init", "must be >= delta_min")
    if not r.delta_step > 0:
        bad("relay.delta_step", "must be > 0")
    if r.max_rounds < 1:
        bad("relay.max_rounds", "must be >= 1")
    if r.csi_noise_db < 0:
        bad("relay.csi_noise_db", "must be >= 0")

    a = cfg.adversary
    if a.max_hops < 1:
        bad("adversary.max_hops", "must be >= 1")
    if a.evidence_mode not in ("fractional", "binary"):
        bad("adversary.evidence_mode", "must be 'fractional' or 'binary'")

    o = cfg.optimizer
    for i, cell in enumerate(o.small_cells):
        if isinstance(cell, bool) or not isinstance(cell, int) or not 0 <= cell < n_cells:
            bad("optimizer.small_cells", f"entry {i} ({cell!r}) is not a cell in [0, {n_cells})")
    if o.file_count < 1:
        bad("optimizer.file_count", "must be >= 1")
    if o.zipf_alpha < 0:
        bad("optimizer.zipf_alpha", "must be >= 0")
    for name in ("macro_cache", "small_cache"):
        if getattr(o, name) < 0:
            bad(f"optimizer.{name}", "must be >= 0")
    for name in ("bandwidth_hz", "backhaul_capacity_bps", "frequency_mhz", "macro_height_m",
                 "small_height_m", "user_height_m", "step0"):
        if not getattr(o, name) > 0:
            bad(f"optimizer.{name}", "must be > 0")
    if not 0 < o.bandwidth_share <= 1:
        bad("optimizer.bandwidth_share", "must lie in (0, 1]")
    if not 0 <= o.sharing_index <= 1:
        bad("optimizer.sharing_index", "must lie in [0, 1]")
    for name in ("eta", "macro_harvest_w", "small_harvest_w", "macro_circuit_w", "small_circuit_w"):
        if getattr(o, name) < 0:
            bad(f"optimizer.{name}", "must be >= 0")
    if o.max_iter < 1:
        bad("optimizer.max_iter", "must be >= 1")
    if not o.tol >= 0:
        bad("optimizer.tol", "must be >= 0")
    if o.outage_policy not in ("abort", "drop"):
        bad("optimizer.outage_policy", "must be 'abort' or 'drop'")

    u = cfg.run
    if u.frames < 0:
        bad("run.frames", "must be >= 0")
    if u.replications < 1:
        bad("run.replications", "must be >= 1")
    if u.scheme not in SCHEMES:
        bad("run.scheme", f"must be one of {', '.join(SCHEMES)}")
    if not u.schemes or any(s not in SCHEMES for s in u.schemes):
        bad("run.schemes", f"entries must be drawn from {', '.join(SCHEMES)}")


def from_dict(data: Optional[dict], lines: Optional[dict[str, int]] = None) -> ScenarioConfig:
    """Build and validate a config from a parsed mapping."""
    lines = lines or {}
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping", lines.get(""))
    fmt = data.get("format", FORMAT_TAG)
    if fmt != FORMAT_TAG:
        raise ConfigError("format", f"unsupported format {fmt!r}, expected {FORMAT_TAG!r}",
                          lines.get("format"))
    built = {}
    for key, value in data.items():
        if key == "format":
            continue
        if key not in _SECTION_TYPES:
            raise ConfigError(key, "unknown section", lines.get(key))
        cls = _SECTION_TYPES[key]
        if value is None:
            value = {}
        if not isinstance(value, dict):
            raise ConfigError(key, "section must be a mapping", lines.get(key))
        defaults = cls()
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for name, v in value.items():
            path = f"{key}.{name}"
            if name not in known:
                raise ConfigError(path, "unknown key", lines.get(path))
            kwargs[name] = _coerce(path, getattr(defaults, name), v, lines.get(path))
        built[key] = cls(**kwargs)
    cfg = ScenarioConfig(**built)
    _validate(cfg, lines)
    return cfg


def _node_lines(node, prefix="", out=None) -> dict[str, int]:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _node_lines(v, path, out)
    return out


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(source, f"YAML parse error: {getattr(exc, 'problem', exc)}", line) from None
    lines = _node_lines(node) if node is not None else {}
    return from_dict(data, lines)


def load_config(path) -> ScenarioConfig:
    """Read, default and validate a YAML scenario file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(str(p), "config file not found")
    return parse_config(p.read_text(), str(p))


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def default_config() -> ScenarioConfig:
    return ScenarioConfig()
