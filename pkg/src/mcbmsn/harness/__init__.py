"""Scenario configuration, seeded replications, Monte Carlo summaries and sweeps."""

from .config import (FORMAT_TAG, SCHEMES, ScenarioConfig, default_config, dump_config, from_dict,
                     load_config, parse_config)
from .experiments import PRESETS, read_experiment_csv, run_experiment
from .scenario import (METRIC_NAMES, MetricsRecord, build_radio_instance, records_to_csv,
                       run_scenario, seed_streams)
from .stats import MetricSummary, RunSummary, monte_carlo, summarize, summarize_records

__all__ = [
    "FORMAT_TAG", "METRIC_NAMES", "MetricSummary", "MetricsRecord", "PRESETS", "RunSummary",
    "SCHEMES", "ScenarioConfig", "build_radio_instance", "default_config", "dump_config",
    "from_dict", "load_config", "monte_carlo", "parse_config", "read_experiment_csv",
    "records_to_csv", "run_experiment", "run_scenario", "seed_streams", "summarize",
    "summarize_records",
]
