"""Cache-aware association, power sharing and reference schemes."""

from .baselines import (SchemeOutcome, evaluate, fpa_allocate, p1_objective, refine_powers,
                        rpa_allocate, run_scheme)
from .caching import CacheVector, ContentCatalog, optimal_cache, zipf_popularity
from .dual import (DualState, PrimalState, SolveResult, associate, association_objective,
                   diminishing_step, dual_update, improve_association, k_curvature,
                   k_stationarity, optimal_k, solve)
from .estimator import CacheAwareAssociation
from .io import read_instance, read_trace, write_instance, write_trace
from .lambertw import lambert_w0, lambert_w0_of_exp
from .radio import (RadioInstance, capacity_matrix, power_and_grid, power_balance_residual, sinr,
                    sinr_matrix, throughput, user_rates, utility)

__all__ = [
    "CacheAwareAssociation", "CacheVector", "ContentCatalog", "DualState", "PrimalState",
    "RadioInstance", "SchemeOutcome", "SolveResult", "associate", "association_objective",
    "capacity_matrix", "diminishing_step", "dual_update", "evaluate", "fpa_allocate",
    "improve_association", "k_curvature", "k_stationarity", "lambert_w0", "lambert_w0_of_exp",
    "optimal_cache",
    "optimal_k", "p1_objective", "power_and_grid", "power_balance_residual", "read_instance",
    "read_trace", "refine_powers", "rpa_allocate", "run_scheme", "sinr", "sinr_matrix",
    "solve", "throughput", "user_rates", "utility", "write_instance", "write_trace",
    "zipf_popularity",
]
