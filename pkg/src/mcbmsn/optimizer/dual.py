"""Cache-aware user association by Lagrangian dual decomposition.

With powers fixed, the association problem keeps three terms per station:
log link capacity of each served user, ``k^2 ln(hit)`` for the chance that
all ``k`` served users hit the cache, and ``-k ln k`` for band splitting.
Relaxing the SINR floor (multipliers ``mu``) and the load consistency
``sum_j x_ij = k_i`` (multipliers ``v``) splits it into a per-user argmax
and a per-station closed form for ``k`` via Lambert W; the multipliers
follow projected subgradient steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..exceptions import InfeasibleInstanceError, UnassociableUserError
from .caching import ContentCatalog, optimal_cache
from .lambertw import lambert_w0_of_exp
from .radio import RadioInstance, capacity_matrix, power_and_grid, sinr_matrix


@dataclass(frozen=True, eq=False)
class PrimalState:
    x: np.ndarray            # (B, U) binary association
    P: np.ndarray            # (B,) transmit power, W
    G: np.ndarray            # (B,) grid draw, W
    eps_share: np.ndarray    # (B, B) exported power
    k: np.ndarray            # (B,) users per station

    @property
    def assignment(self) -> np.ndarray:
        return np.argmax(self.x, axis=0)


@dataclass(frozen=True, eq=False)
class DualState:
    mu: np.ndarray
    v: np.ndarray
    iteration: int = 0
    step: float = 0.0


def diminishing_step(step0: float = 0.1) -> Callable[[int], float]:
    """delta(t) = step0 / sqrt(t), t >= 1."""
    return lambda t: step0 / math.sqrt(t)


def associate(j: int, mu_j: float, v, P, instance: RadioInstance,
              gamma: Optional[np.ndarray] = None) -> int:
    """Station maximising ``ln c_ij + mu_j gamma_ij - v_i`` for user ``j``."""
    if gamma is None:
        gamma = sinr_matrix(P, instance)
    g = gamma[:, j]
    c = instance.bandwidth_hz * np.log1p(g)
    ok = c > 0
    if not ok.any():
        raise UnassociableUserError(f"user {j} has zero capacity to every station")
    with np.errstate(divide="ignore"):
        score = np.where(ok, np.log(np.where(ok, c, 1.0)) + mu_j * g - np.asarray(v, dtype=float),
                         -np.inf)
    return int(np.argmax(score))


def associate_all(mu, v, log_c: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Vectorised :func:`associate`; returns the station index per user."""
    score = log_c + np.asarray(mu)[None, :] * gamma - np.asarray(v)[:, None]
    return np.argmax(score, axis=0)


def optimal_k(v, hit_mass):
    """Stationary point of ``k^2 ln(m) - k ln k + v k`` in k.

    ``k* = W(a e^(v-1)) / a`` with ``a = -2 ln m``; requires ``0 < m < 1``.
    """
    m = np.asarray(hit_mass, dtype=float)
    if np.any(~((m > 0) & (m < 1))):
        raise ValueError("hit mass must lie strictly between 0 and 1")
    a = -2.0 * np.log(m)
    v = np.asarray(v, dtype=float)
    k = lambert_w0_of_exp(np.log(a) + v - 1.0) / a
    return float(k) if np.ndim(k) == 0 else k


def k_stationarity(k, v, hit_mass):
    """First-order condition ``2k ln m - ln k - 1 + v`` (zero at the optimum)."""
    return 2.0 * k * np.log(hit_mass) - np.log(k) - 1.0 + v


def k_curvature(k, hit_mass):
    """Second derivative ``2 ln m - 1/k`` of the k-subproblem (negative: concave)."""
    return 2.0 * np.log(hit_mass) - 1.0 / k


def dual_update(dual: DualState, x, k, gamma, min_sinr: float,
                step: Optional[float] = None, step0: float = 0.1) -> DualState:
    """Projected subgradient step on both multiplier vectors."""
    t = dual.iteration + 1
    delta = step0 / math.sqrt(t) if step is None else step
    x = np.asarray(x, dtype=float)
    served = (x * gamma).sum(axis=0)
    load = x.sum(axis=1)
    mu = np.maximum(dual.mu - delta * (served - min_sinr), 0.0)
    v = np.maximum(dual.v - delta * (np.asarray(k, dtype=float) - load), 0.0)
    return DualState(mu, v, t, delta)


def _k_terms(load: np.ndarray, log_hit: np.ndarray) -> np.ndarray:
    kk = load.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_log_k = np.where(kk > 0, kk * np.log(np.where(kk > 0, kk, 1.0)), 0.0)
        cache = np.where(kk > 0, kk ** 2 * log_hit, 0.0)
    return cache - k_log_k


def association_objective(assignment, log_c: np.ndarray, hit) -> float:
    """Reduced objective of an association with k taken as the station loads."""
    a = np.asarray(assignment, dtype=int)
    b, u = log_c.shape
    load = np.bincount(a, minlength=b)
    with np.errstate(divide="ignore"):
        log_hit = np.log(np.asarray(hit, dtype=float))
    return float(log_c[a, np.arange(u)].sum() + _k_terms(load, log_hit).sum())


def check_feasible(gamma: np.ndarray, min_sinr: float) -> None:
    best = gamma.max(axis=0)
    bad = np.flatnonzero(best < min_sinr)
    if len(bad):
        raise InfeasibleInstanceError(bad.tolist(), float(best[bad].min()), min_sinr)


def improve_association(assignment, log_c: np.ndarray, log_hit: np.ndarray,
                        allowed: np.ndarray) -> np.ndarray:
    """Single-user moves that raise the reduced objective, until none is left.

    Users with identical channels get identical multiplier-adjusted scores
    and move between stations as a block, so the dual iterates alone can
    miss balanced splits.  Only moves to ``allowed[i, j]`` stations are tried.
    """
    a = np.array(assignment, dtype=int)
    b, u = log_c.shape
    load = np.bincount(a, minlength=b)

    def station_terms(k):
        return _k_terms(np.asarray(k), log_hit)

    improved = True
    while improved:
        improved = False
        for j in range(u):
            src = a[j]
            up = station_terms(load + 1)
            down = station_terms(load - 1)
            now = station_terms(load)
            gain = (log_c[:, j] - log_c[src, j] + up - now + down[src] - now[src])
            gain[src] = 0.0
            gain[~allowed[:, j] | np.isnan(gain)] = -np.inf
            dst = int(np.argmax(gain))
            if gain[dst] > 1e-12:
                a[j] = dst
                load[src] -= 1
                load[dst] += 1
                improved = True
    return a


@dataclass
class SolveResult:
    primal: PrimalState
    dual: DualState
    objective: float                 # reduced objective of the returned association
    p2_objective: float              # ... minus the grid-power price
    trace: list[dict] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    min_multiplier: float = 0.0      # smallest multiplier seen over all iterations
    hit: np.ndarray = None


def solve(instance: RadioInstance, catalog: ContentCatalog, max_iter: int = 2000,
          tol: float = 1e-6, step0: float = 0.1, P=None,
          step_rule: Optional[Callable[[int], float]] = None) -> SolveResult:
    """Dual subgradient association with top-L caching at fixed powers.

    Each iteration associates every user by its multiplier-adjusted score,
    sets each station's relaxed load from the Lambert-W closed form, and
    steps both multiplier vectors.  Stops after ``max_iter`` iterations or
    when no multiplier moves by more than ``tol``.  The returned association
    is the best SINR-feasible iterate under the reduced objective, polished
    by :func:`improve_association`, with ``k`` equal to the station loads.
    """
    P = instance.max_power_w.copy() if P is None else np.asarray(P, dtype=float)
    gamma = sinr_matrix(P, instance)
    check_feasible(gamma, instance.min_sinr)
    cache = optimal_cache(catalog, instance.cache_capacity)
    hit = cache.hit_mass(catalog)
    with np.errstate(divide="ignore"):
        log_hit = np.log(hit)
        log_c = np.log(capacity_matrix(P, instance))
    interior = (hit > 0) & (hit < 1)
    rule = step_rule or diminishing_step(step0)
    b, u = gamma.shape
    users = np.arange(u)
    G, eps_share = power_and_grid(instance, P)
    grid_cost = instance.eta * float(G.sum())

    dual = DualState(np.zeros(u), np.zeros(b))
    best_obj, best_a = -math.inf, None
    trace = []
    min_mult = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        a = associate_all(dual.mu, dual.v, log_c, gamma)
        load = np.bincount(a, minlength=b)
        x = np.zeros((b, u))
        x[a, users] = 1.0
        k = load.astype(float)
        if interior.any():
            k[interior] = optimal_k(dual.v[interior], hit[interior])
        obj = float(log_c[a, users].sum() + _k_terms(load, log_hit).sum())
        shortfall = float(np.maximum(instance.min_sinr - gamma[a, users], 0.0).max())
        trace.append({"iteration": it, "objective": obj - grid_cost, "max_violation": shortfall})
        if shortfall == 0.0 and obj > best_obj:
            best_obj, best_a = obj, a
        new = dual_update(dual, x, k, gamma, instance.min_sinr, step=rule(it))
        min_mult = min(min_mult, float(new.mu.min()), float(new.v.min()))
        change = max(float(np.abs(new.mu - dual.mu).max(initial=0.0)),
                     float(np.abs(new.v - dual.v).max(initial=0.0)))
        dual = new
        if change < tol:
            converged = True
            break

    if best_a is None:
        best_a = np.argmax(gamma, axis=0)
    best_a = improve_association(best_a, log_c, log_hit, gamma >= instance.min_sinr)
    best_obj = association_objective(best_a, log_c, hit)
    x = np.zeros((b, u))
    x[best_a, users] = 1.0
    primal = PrimalState(x=x, P=P, G=G, eps_share=eps_share, k=x.sum(axis=1))
    return SolveResult(primal, dual, best_obj, best_obj - grid_cost, trace, it, converged,
                       min_mult, hit)
