"""Monte Carlo aggregation with Student-t confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from .config import ScenarioConfig
from .scenario import METRIC_NAMES, MetricsRecord, run_scenario

CONFIDENCE = 0.90


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std_error: float
    ci_lo: float
    ci_hi: float
    n: int


@dataclass(frozen=True)
class RunSummary:
    metrics: dict
    replications: int
    records: tuple = ()

    def __getitem__(self, name: str) -> MetricSummary:
        return self.metrics[name]


def summarize(values: Sequence[float], confidence: float = CONFIDENCE) -> MetricSummary:
    """Mean, standard error and two-sided t interval.

    A single value gives a zero-width interval.
    """
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("no values to summarise")
    mean = math.fsum(x) / n
    if n < 2:
        return MetricSummary(mean, 0.0, mean, mean, n)
    se = float(np.std(x, ddof=1)) / math.sqrt(n)
    half = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1)) * se
    return MetricSummary(mean, se, mean - half, mean + half, n)


def summarize_records(records: Iterable[MetricsRecord]) -> RunSummary:
    recs = sorted(records, key=lambda r: r.seed)
    metrics = {name: summarize([float(getattr(r, name)) for r in recs]) for name in METRIC_NAMES}
    return RunSummary(metrics, len(recs), tuple(recs))


def monte_carlo(config: ScenarioConfig, replications: Optional[int] = None,
                scheme: Optional[str] = None, beamforming: Optional[bool] = None) -> RunSummary:
    """Run replications with seeds ``seed_base + r`` and aggregate every metric."""
    n = config.run.replications if replications is None else int(replications)
    if n < 1:
        raise ValueError("replications must be >= 1")
    base = config.run.seed_base
    recs = [run_scenario(config, base + r, scheme=scheme, beamforming=beamforming)
            for r in range(n)]
    return summarize_records(recs)
