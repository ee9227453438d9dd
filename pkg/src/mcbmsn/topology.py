"""Network layout, cell grid, propagation and mobility.

Node 0 is always the base station (the data sink); sensors are numbered
1..n-1.  Topologies are immutable: every operation that changes positions
or energies returns a new :class:`Topology`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

import numpy as np

from .exceptions import ConfigError, LinkInfeasibleError

BS_ID = 0


@dataclass(frozen=True)
class GridSpec:
    """Square field of side ``side_m`` split into ``cells_per_side``² cells."""

    side_m: float
    cells_per_side: int

    def __post_init__(self):
        if not self.side_m > 0:
            raise ConfigError("side_m", f"must be > 0, got {self.side_m}")
        if int(self.cells_per_side) != self.cells_per_side or self.cells_per_side < 1:
            raise ConfigError("cells_per_side", f"must be an integer >= 1, got {self.cells_per_side}")

    @property
    def cell_side_m(self) -> float:
        return self.side_m / self.cells_per_side

    @property
    def n_cells(self) -> int:
        return self.cells_per_side ** 2

    def cell_center(self, index: int) -> tuple[float, float]:
        if not 0 <= index < self.n_cells:
            raise ConfigError("bs_cell", f"cell index {index} outside [0, {self.n_cells})")
        row, col = divmod(index, self.cells_per_side)
        half = self.cell_side_m / 2
        return (col * self.cell_side_m + half, row * self.cell_side_m + half)


def cell_of(position, grid: GridSpec) -> int:
    """Row-major cell index of ``position``; the far edge belongs to the last cell."""
    x, y = float(position[0]), float(position[1])
    if not (0.0 <= x <= grid.side_m and 0.0 <= y <= grid.side_m):
        raise ValueError(f"position ({x}, {y}) outside field [0, {grid.side_m}]^2")
    n = grid.cells_per_side
    col = min(int(x // grid.cell_side_m), n - 1)
    row = min(int(y // grid.cell_side_m), n - 1)
    return row * n + col


def cells_of(positions: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Vectorised :func:`cell_of` for an ``(n, 2)`` array (no bounds check)."""
    n = grid.cells_per_side
    idx = np.minimum((np.asarray(positions) // grid.cell_side_m).astype(int), n - 1)
    return idx[:, 1] * n + idx[:, 0]


# --------------------------------------------------------------------------
# Propagation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelModel:
    """Link-budget parameters.

    ``model_kind`` is ``"log-distance"`` (``reference_loss_db`` at 1 m plus
    ``10 n log10(d)``) or ``"okumura-hata"`` (urban Hata with the given carrier
    and antenna heights).  The four loss terms are added to the required
    transmit power; they default to zero so the bare model stays analytic.
    """

    model_kind: str = "log-distance"
    path_loss_exponent: float = 3.0
    reference_loss_db: float = 50.6
    frequency_mhz: float = 900.0
    bs_height_m: float = 30.0
    ms_height_m: float = 1.5
    noise_power_w: float = 1e-15
    bandwidth_hz: float = 250e3
    rx_sensitivity_dbm: float = -100.0
    min_snr_db: float = 10.0
    tx_loss_db: float = 0.0
    rx_loss_db: float = 0.0
    backoff_db: float = 0.0
    margin_db: float = 0.0

    def __post_init__(self):
        if self.model_kind not in ("log-distance", "okumura-hata"):
            raise ConfigError("model_kind", f"unknown propagation model {self.model_kind!r}")
        if self.model_kind == "log-distance" and self.path_loss_exponent < 2:
            raise ConfigError("path_loss_exponent", "must be >= 2 for log-distance")
        if not self.bandwidth_hz > 0:
            raise ConfigError("bandwidth_hz", "must be > 0")
        if not self.noise_power_w > 0:
            raise ConfigError("noise_power_w", "must be > 0")

    @property
    def noise_power_dbm(self) -> float:
        return 10.0 * math.log10(self.noise_power_w) + 30.0

    @property
    def rx_threshold_dbm(self) -> float:
        """Weakest usable received power: sensitivity or noise + SNR floor."""
        return max(self.rx_sensitivity_dbm, self.noise_power_dbm + self.min_snr_db)

    @property
    def fixed_losses_db(self) -> float:
        return self.tx_loss_db + self.rx_loss_db + self.backoff_db + self.margin_db


def hata_urban_db(distance_m, frequency_mhz, bs_height_m, ms_height_m):
    """Okumura-Hata median loss for a small/medium city."""
    d_km = np.asarray(distance_m, dtype=float) / 1000.0
    logf = math.log10(frequency_mhz)
    a_hm = (1.1 * logf - 0.7) * ms_height_m - (1.56 * logf - 0.8)
    return (69.55 + 26.16 * logf - 13.82 * math.log10(bs_height_m) - a_hm
            + (44.9 - 6.55 * math.log10(bs_height_m)) * np.log10(d_km))


def path_loss_db(distance_m, channel: ChannelModel):
    """Path loss in dB, clipped at zero.  Accepts scalars or arrays."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be > 0")
    if channel.model_kind == "log-distance":
        loss = channel.reference_loss_db + 10.0 * channel.path_loss_exponent * np.log10(d)
    else:
        loss = hata_urban_db(d, channel.frequency_mhz, channel.bs_height_m, channel.ms_height_m)
    loss = np.maximum(loss, 0.0)
    return float(loss) if loss.ndim == 0 else loss


def required_tx_power_dbm(distance_m, channel: ChannelModel, max_power_dbm: Optional[float] = None):
    """Smallest transmit power closing the link budget at ``distance_m``.

    Raises :class:`LinkInfeasibleError` when ``max_power_dbm`` is given and the
    requirement exceeds it (scalar input only).
    """
    p = channel.rx_threshold_dbm + channel.fixed_losses_db + path_loss_db(distance_m, channel)
    if max_power_dbm is not None and np.ndim(p) == 0 and p > max_power_dbm + 1e-12:
        raise LinkInfeasibleError(distance_m, p, max_power_dbm)
    return p


def max_reach_m(power_dbm: float, channel: ChannelModel) -> float:
    """Largest distance at which ``power_dbm`` still closes the budget."""
    budget = power_dbm - channel.rx_threshold_dbm - channel.fixed_losses_db
    if channel.model_kind == "log-distance":
        return 10.0 ** ((budget - channel.reference_loss_db) / (10.0 * channel.path_loss_exponent))
    logf = math.log10(channel.frequency_mhz)
    a_hm = (1.1 * logf - 0.7) * channel.ms_height_m - (1.56 * logf - 0.8)
    intercept = 69.55 + 26.16 * logf - 13.82 * math.log10(channel.bs_height_m) - a_hm
    slope = 44.9 - 6.55 * math.log10(channel.bs_height_m)
    return 1000.0 * 10.0 ** ((budget - intercept) / slope)


def calibrated_reference_loss(reach_m: float, power_dbm: float, exponent: float,
                              rx_threshold_dbm: float, fixed_losses_db: float = 0.0) -> float:
    """Reference loss at 1 m that makes ``power_dbm`` reach exactly ``reach_m``."""
    return power_dbm - rx_threshold_dbm - fixed_losses_db - 10.0 * exponent * math.log10(reach_m)


def dbm_to_w(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def w_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float)) + 30.0


def channel_gain(distance_m, channel: ChannelModel):
    """Linear power gain ``10^(-PL/10)``."""
    return 10.0 ** (-np.asarray(path_loss_db(distance_m, channel)) / 10.0)


# --------------------------------------------------------------------------
# Nodes and topology
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NodeState:
    id: int
    position: tuple[float, float]
    residual_energy: float
    max_tx_power_dbm: float
    is_base_station: bool


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Topology:
    """Positions, energies and power limits of every node, plus mobility state.

    Arrays are read-only; use :meth:`with_energy` / :func:`move_nodes` to
    derive new topologies.
    """

    grid: GridSpec
    positions: np.ndarray
    energy: np.ndarray
    max_power_dbm: np.ndarray
    waypoints: Optional[np.ndarray] = None
    speeds: Optional[np.ndarray] = None
    pause_left: Optional[np.ndarray] = None
    alive_floor: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions))
        object.__setattr__(self, "energy", _frozen(self.energy))
        object.__setattr__(self, "max_power_dbm", _frozen(self.max_power_dbm))
        n = len(self.positions)
        if n < 2:
            raise ConfigError("n_sensors", "a topology needs at least 2 nodes")
        if self.positions.shape != (n, 2) or self.energy.shape != (n,) or self.max_power_dbm.shape != (n,):
            raise ValueError("inconsistent node array shapes")
        if np.any(self.positions < 0) or np.any(self.positions > self.grid.side_m):
            raise ValueError("node outside the field")
        if np.any(self.energy < 0):
            raise ValueError("residual energy must be >= 0")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def bs_id(self) -> int:
        return BS_ID

    @property
    def density(self) -> float:
        """Nodes per square metre over the whole field."""
        return self.n_nodes / self.grid.side_m ** 2

    @property
    def alive(self) -> np.ndarray:
        return self.energy > self.alive_floor

    @property
    def cells(self) -> np.ndarray:
        return cells_of(self.positions, self.grid)

    @property
    def bs_cell(self) -> int:
        return cell_of(self.positions[BS_ID], self.grid)

    def node(self, i: int) -> NodeState:
        return NodeState(
            id=int(i),
            position=(float(self.positions[i, 0]), float(self.positions[i, 1])),
            residual_energy=float(self.energy[i]),
            max_tx_power_dbm=float(self.max_power_dbm[i]),
            is_base_station=(i == BS_ID),
        )

    @property
    def nodes(self) -> tuple[NodeState, ...]:
        return tuple(self.node(i) for i in range(self.n_nodes))

    def __iter__(self) -> Iterator[NodeState]:
        return iter(self.nodes)

    def distance(self, a: int, b: int) -> float:
        return float(np.hypot(*(self.positions[a] - self.positions[b])))

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def with_energy(self, energy) -> "Topology":
        return replace(self, energy=energy)


def build_grid(n_nodes: int, side_m: float, cells_per_side: int, bs_cell: int, seed,
               distribution: str = "uniform", sensor_energy_j: float = 5.0,
               sensor_max_power_dbm: float = 30.0, bs_max_power_dbm: float = 30.0,
               hotspot_count: int = 3, hotspot_sigma_m: float = 60.0) -> Topology:
    """Place one base station and ``n_nodes - 1`` sensors.

    The base station sits at the centre of ``bs_cell``.  Sensors are uniform
    over the field, or, in ``"hotspot"`` mode, Gaussian around
    ``hotspot_count`` uniformly drawn centres (clipped to the field).
    """
    grid = GridSpec(side_m, cells_per_side)
    if not 0 <= bs_cell < grid.n_cells:
        raise ConfigError("bs_cell", f"cell index {bs_cell} outside [0, {grid.n_cells})")
    if n_nodes < 2:
        raise ConfigError("n_sensors", f"need at least 2 nodes, got {n_nodes}")
    rng = np.random.default_rng(seed)
    n_sensors = n_nodes - 1
    if distribution == "uniform":
        sensors = rng.uniform(0.0, side_m, size=(n_sensors, 2))
    elif distribution == "hotspot":
        centres = rng.uniform(0.0, side_m, size=(hotspot_count, 2))
        which = rng.integers(0, hotspot_count, size=n_sensors)
        sensors = np.clip(centres[which] + rng.normal(0.0, hotspot_sigma_m, size=(n_sensors, 2)),
                          0.0, side_m)
    else:
        raise ConfigError("distribution", f"unknown sensor distribution {distribution!r}")
    positions = np.vstack([np.asarray(grid.cell_center(bs_cell))[None, :], sensors])
    energy = np.full(n_nodes, float(sensor_energy_j))
    energy[BS_ID] = math.inf
    power = np.full(n_nodes, float(sensor_max_power_dbm))
    power[BS_ID] = bs_max_power_dbm
    return Topology(grid=grid, positions=positions, energy=energy, max_power_dbm=power)


# --------------------------------------------------------------------------
# Mobility
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RandomWaypoint:
    speed_min: float = 0.5
    speed_max: float = 2.0
    pause_s: float = 0.0

    def __post_init__(self):
        if self.speed_min < 0 or self.speed_max < self.speed_min:
            raise ConfigError("mobility", "need 0 <= speed_min <= speed_max")
        if self.pause_s < 0:
            raise ConfigError("mobility.pause_s", "must be >= 0")


def move_nodes(topology: Topology, mobility: RandomWaypoint, dt: float, seed) -> Topology:
    """Advance every sensor by ``dt`` seconds of random-waypoint motion.

    The base station never moves.  Waypoints are drawn inside the field, so
    trajectories stay in bounds; positions are clipped against rounding.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    rng = np.random.default_rng(seed)
    n = topology.n_nodes
    side = topology.grid.side_m
    pos = np.array(topology.positions)
    if topology.waypoints is None:
        wp = rng.uniform(0.0, side, size=(n, 2))
        speeds = rng.uniform(mobility.speed_min, mobility.speed_max, size=n)
        pause = np.zeros(n)
    else:
        wp = np.array(topology.waypoints)
        speeds = np.array(topology.speeds)
        pause = np.array(topology.pause_left)

    for i in range(1, n):
        left = dt
        while left > 0:
            if pause[i] > 0:
                used = min(pause[i], left)
                pause[i] -= used
                left -= used
                continue
            if speeds[i] <= 0:
                break
            gap = wp[i] - pos[i]
            dist = math.hypot(gap[0], gap[1])
            travel = speeds[i] * left
            if travel < dist:
                pos[i] += gap * (travel / dist)
                break
            pos[i] = wp[i]
            left -= dist / speeds[i]
            pause[i] = mobility.pause_s
            wp[i] = rng.uniform(0.0, side, size=2)
            speeds[i] = rng.uniform(mobility.speed_min, mobility.speed_max)
    pos = np.clip(pos, 0.0, side)
    pos[BS_ID] = topology.positions[BS_ID]
    return replace(topology, positions=pos, waypoints=wp, speeds=speeds, pause_left=pause)
