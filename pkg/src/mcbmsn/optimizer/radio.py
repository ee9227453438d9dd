"""Base-station radio instance: SINR, cache-aware throughput, power sharing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .caching import CacheVector, ContentCatalog


@dataclass(frozen=True, eq=False)
class RadioInstance:
    """Downlink between ``B`` base stations and ``U`` users.

    gains : (B, U) linear channel gains h_ij
    max_power_w, harvest_w, circuit_power_w : (B,) per-station watts
    cache_capacity : (B,) number of files each station can hold
    min_sinr : linear SINR floor
    bandwidth_share : fraction of the band scaling per-user throughput
    sharing_index : fraction of exported power that survives a transfer
    eta : price weight of grid power
    """

    gains: np.ndarray
    max_power_w: np.ndarray
    noise_w: float = 1e-13
    bandwidth_hz: float = 1e6
    bandwidth_share: float = 1.0
    min_sinr: float = 0.1
    cache_capacity: np.ndarray = None
    is_macro: np.ndarray = None
    eta: float = 0.0
    harvest_w: np.ndarray = None
    sharing_index: float = 0.0
    circuit_power_w: np.ndarray = None

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float)
        if g.ndim != 2:
            raise ValueError("gains must be a (B, U) matrix")
        if np.any(~(g > 0)):
            raise ValueError("channel gains must be > 0")
        b = g.shape[0]
        pmax = np.broadcast_to(np.asarray(self.max_power_w, dtype=float), (b,)).copy()
        if np.any(~(pmax > 0)):
            raise ValueError("max power must be > 0")
        if not self.min_sinr > 0:
            raise ValueError("min_sinr must be > 0")
        if not self.noise_w > 0 or not self.bandwidth_hz > 0:
            raise ValueError("noise and bandwidth must be > 0")
        if not 0 < self.bandwidth_share <= 1:
            raise ValueError("bandwidth_share must lie in (0, 1]")
        if not 0 <= self.sharing_index <= 1:
            raise ValueError("sharing_index must lie in [0, 1]")

        def vec(v, default):
            return np.broadcast_to(np.asarray(default if v is None else v, dtype=float), (b,)).copy()

        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "max_power_w", pmax)
        object.__setattr__(self, "cache_capacity", vec(self.cache_capacity, 0).astype(int))
        object.__setattr__(self, "is_macro", vec(self.is_macro, 0).astype(bool))
        object.__setattr__(self, "harvest_w", vec(self.harvest_w, 0.0))
        object.__setattr__(self, "circuit_power_w", vec(self.circuit_power_w, 0.0))

    @property
    def n_bs(self) -> int:
        return self.gains.shape[0]

    @property
    def n_users(self) -> int:
        return self.gains.shape[1]

    def subset_users(self, users) -> "RadioInstance":
        from dataclasses import replace
        return replace(self, gains=self.gains[:, list(users)])


def sinr_matrix(P, instance: RadioInstance) -> np.ndarray:
    """(B, U) SINR with every other station's power as interference."""
    P = np.asarray(P, dtype=float)
    if np.any(P < 0):
        raise ValueError("powers must be >= 0")
    rx = P[:, None] * instance.gains
    return rx / (rx.sum(axis=0, keepdims=True) - rx + instance.noise_w)


def sinr(i: int, j: int, P, instance: RadioInstance) -> float:
    P = np.asarray(P, dtype=float)
    if np.any(P < 0):
        raise ValueError("powers must be >= 0")
    h = instance.gains[:, j]
    interference = float(np.dot(P, h) - P[i] * h[i])
    return float(P[i] * h[i] / (interference + instance.noise_w))


def capacity_matrix(P, instance: RadioInstance) -> np.ndarray:
    """Link capacity ``c_ij = B ln(1 + SINR_ij)``."""
    return instance.bandwidth_hz * np.log1p(sinr_matrix(P, instance))


def throughput(i: int, j: int, P, x, q, catalog: ContentCatalog, instance: RadioInstance) -> float:
    """Cache-aware throughput of user ``j`` served by station ``i``.

    The station's hit probability raised to its load, times an equal split
    of the (shared) band, times the Shannon term with natural log.
    """
    x = np.asarray(x)
    if x[i, j] != 1:
        raise ValueError(f"user {j} is not associated with station {i}")
    k = int(x[i].sum())
    qmat = q.q if isinstance(q, CacheVector) else np.asarray(q, dtype=float)
    hit = float(catalog.popularity @ qmat[:, i])
    bw = instance.bandwidth_hz * instance.bandwidth_share / k
    return hit ** k * bw * math.log1p(sinr(i, j, P, instance))


def utility(rate: float) -> float:
    """Log-utility; ``-inf`` for a zero rate."""
    return math.log(rate) if rate > 0 else -math.inf


def user_rates(assignment, P, hit, instance: RadioInstance) -> np.ndarray:
    """Per-user throughput for an assignment vector (user -> station)."""
    a = np.asarray(assignment, dtype=int)
    gamma = sinr_matrix(P, instance)
    k = np.bincount(a, minlength=instance.n_bs)
    users = np.arange(instance.n_users)
    hit = np.asarray(hit, dtype=float)
    bw = instance.bandwidth_hz * instance.bandwidth_share / k[a]
    return hit[a] ** k[a] * bw * np.log1p(gamma[a, users])


def power_and_grid(instance: RadioInstance, P_target, slack_w: float = 0.0):
    """Settle station powers with harvest, inter-station sharing and grid draw.

    Each station first uses its own harvest.  Deficits (largest first) are
    then fed from surpluses (largest first); only ``sharing_index`` of an
    export arrives.  The remainder comes from the grid.  Returns ``(G, eps)``
    with ``eps[a, b]`` the power exported from ``a`` to ``b``.
    """
    P = np.asarray(P_target, dtype=float)
    if np.any(P > instance.max_power_w * (1 + 1e-12)):
        raise ValueError("target power exceeds the station limit")
    b = instance.n_bs
    surplus = np.maximum(instance.harvest_w - P, 0.0)
    deficit = np.maximum(P + slack_w - instance.harvest_w, 0.0)
    eps = np.zeros((b, b))
    beta = instance.sharing_index
    if beta > 0:
        for i in sorted(range(b), key=lambda t: (-deficit[t], t)):
            for src in sorted(range(b), key=lambda t: (-surplus[t], t)):
                if deficit[i] <= 0:
                    break
                if src == i or surplus[src] <= 0:
                    continue
                with np.errstate(over="ignore"):
                    sent = min(surplus[src], deficit[i] / beta)
                eps[src, i] += sent
                surplus[src] -= sent
                deficit[i] = max(deficit[i] - beta * sent, 0.0)
    return deficit, eps


def power_balance_residual(instance: RadioInstance, P, G, eps) -> np.ndarray:
    """Supply minus demand per station; non-negative when the balance holds."""
    P = np.asarray(P, dtype=float)
    supply = G + instance.harvest_w + instance.sharing_index * eps.sum(axis=0) - eps.sum(axis=1)
    return supply - P
