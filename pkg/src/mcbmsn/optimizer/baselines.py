"""Reference power allocations and scheme evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .caching import ContentCatalog, optimal_cache
from .dual import PrimalState, association_objective, solve
from .radio import RadioInstance, capacity_matrix, power_and_grid, sinr_matrix, user_rates


def _strongest_signal(P, instance: RadioInstance) -> PrimalState:
    rsrp = np.asarray(P)[:, None] * instance.gains
    a = np.argmax(rsrp, axis=0)
    x = np.zeros(instance.gains.shape)
    x[a, np.arange(instance.n_users)] = 1.0
    G, eps = power_and_grid(instance, P)
    return PrimalState(x=x, P=np.asarray(P, dtype=float), G=G, eps_share=eps, k=x.sum(axis=1))


def fpa_allocate(instance: RadioInstance) -> PrimalState:
    """Every station at full power; users join the strongest received signal."""
    return _strongest_signal(instance.max_power_w.copy(), instance)


def rpa_allocate(instance: RadioInstance, seed) -> PrimalState:
    """Powers uniform on (0, P_max]; users join the strongest received signal."""
    u = np.random.default_rng(seed).random(instance.n_bs)
    return _strongest_signal(instance.max_power_w * (1.0 - u), instance)


def p1_objective(assignment, P, instance: RadioInstance, catalog: ContentCatalog) -> float:
    """Sum of per-user log throughput minus the priced grid draw."""
    hit = optimal_cache(catalog, instance.cache_capacity).hit_mass(catalog)
    rates = user_rates(assignment, P, hit, instance)
    G, _ = power_and_grid(instance, P)
    with np.errstate(divide="ignore"):
        return float(np.log(rates).sum() - instance.eta * G.sum())


def refine_powers(assignment, instance: RadioInstance, catalog: ContentCatalog,
                  levels_db=np.arange(0.0, -31.0, -1.0), passes: int = 2) -> np.ndarray:
    """Coordinate search over per-station backoff levels at a fixed association.

    Each station in turn takes the backoff (dB below its limit) that
    maximises the log-throughput-minus-grid-price objective.
    """
    P = instance.max_power_w.copy()
    factors = 10.0 ** (np.asarray(levels_db) / 10.0)
    best = p1_objective(assignment, P, instance, catalog)
    for _ in range(passes):
        moved = False
        for i in range(instance.n_bs):
            for f in factors:
                trial = P.copy()
                trial[i] = instance.max_power_w[i] * f
                val = p1_objective(assignment, trial, instance, catalog)
                if val > best + 1e-12:
                    best, P, moved = val, trial, True
        if not moved:
            break
    return P


@dataclass(frozen=True)
class SchemeOutcome:
    scheme: str
    primal: PrimalState
    rates: np.ndarray
    sum_rate: float
    grid_power_w: float
    energy_efficiency: float
    backhaul_utilization: float
    objective: float


def evaluate(scheme: str, primal: PrimalState, instance: RadioInstance, catalog: ContentCatalog,
             backhaul_capacity_bps: float) -> SchemeOutcome:
    """Throughput, grid draw, energy efficiency and backhaul load of an allocation.

    Energy efficiency is sum rate over total consumed station power
    (transmit plus circuit); backhaul utilisation is the mean over stations
    of served traffic over backhaul capacity, in percent, capped at 100.
    """
    a = primal.assignment
    hit = optimal_cache(catalog, instance.cache_capacity).hit_mass(catalog)
    rates = user_rates(a, primal.P, hit, instance)
    per_bs = np.bincount(a, weights=rates, minlength=instance.n_bs)
    util = float(np.mean(np.minimum(per_bs / backhaul_capacity_bps, 1.0)) * 100.0)
    consumed = float(primal.P.sum() + instance.circuit_power_w.sum())
    sum_rate = float(rates.sum())
    with np.errstate(divide="ignore"):
        log_c = np.log(capacity_matrix(primal.P, instance))
    obj = association_objective(a, log_c, hit) - instance.eta * float(primal.G.sum())
    return SchemeOutcome(scheme, primal, rates, sum_rate, float(primal.G.sum()),
                         sum_rate / consumed if consumed > 0 else 0.0, util, obj)


def run_scheme(scheme: str, instance: RadioInstance, catalog: ContentCatalog, seed=None,
               max_iter: int = 2000, tol: float = 1e-6, step0: float = 0.1,
               power_refinement: bool = False) -> PrimalState:
    """Allocation produced by ``"MCB-MSN"``, ``"FPA"`` or ``"RPA"``."""
    if scheme == "FPA":
        return fpa_allocate(instance)
    if scheme == "RPA":
        return rpa_allocate(instance, seed)
    if scheme != "MCB-MSN":
        raise ValueError(f"unknown scheme {scheme!r}")
    res = solve(instance, catalog, max_iter=max_iter, tol=tol, step0=step0)
    if not power_refinement:
        return res.primal
    P = refine_powers(res.primal.assignment, instance, catalog)
    res = solve(instance, catalog, max_iter=max_iter, tol=tol, step0=step0, P=P)
    return res.primal
