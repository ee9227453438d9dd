"""Preset sweeps: one CSV per figure axis plus a run manifest.

Each preset varies one quantity over a grid and, at every point, runs the
same replications (seeds ``seed_base + r``) for every enabled scheme.
Rows are ``x, scheme, mean, ci_lo, ci_hi`` for the preset's metric.

Grids
-----
throughput-vs-snr, backhaul-utilization : reference SNR -5..30 dB, step 5
sumrate-vs-n : sensors 20..200, step 20
ee-vs-n : total nodes 20..200, step 20
ee-vs-mtp : macro transmit power 10..43 dBm, step 3
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .. import __version__
from ..topology import hata_urban_db
from .config import ScenarioConfig
from .stats import monte_carlo

CSV_COLUMNS = ("x", "scheme", "mean", "ci_lo", "ci_hi")


def reference_noise_dbm(config: ScenarioConfig, snr_db: float) -> float:
    """Noise level giving ``snr_db`` for the macro cell at one cell side away."""
    o = config.optimizer
    d = config.topology.side_m / config.topology.cells_per_side
    loss = float(hata_urban_db(d, o.frequency_mhz, o.macro_height_m, o.user_height_m))
    return o.macro_power_dbm - loss - snr_db


def _at_snr(cfg: ScenarioConfig, x: float) -> ScenarioConfig:
    return cfg.with_values(optimizer__noise_dbm=reference_noise_dbm(cfg, x))


def _at_sensors(cfg: ScenarioConfig, x: float) -> ScenarioConfig:
    return cfg.with_values(topology__n_nodes=int(x) + 1)


def _at_nodes(cfg: ScenarioConfig, x: float) -> ScenarioConfig:
    return cfg.with_values(topology__n_nodes=int(x))


def _at_mtp(cfg: ScenarioConfig, x: float) -> ScenarioConfig:
    small = min(cfg.optimizer.small_power_dbm, float(x))
    return cfg.with_values(optimizer__macro_power_dbm=float(x), optimizer__small_power_dbm=small,
                           optimizer__power_refinement=True)


@dataclass(frozen=True)
class Preset:
    name: str
    x_label: str
    grid: tuple
    metric: str
    apply: Callable[[ScenarioConfig, float], ScenarioConfig]


PRESETS = {
    p.name: p for p in (
        Preset("throughput-vs-snr", "snr_db", tuple(range(-5, 31, 5)),
               "mean_user_throughput_bps", _at_snr),
        Preset("sumrate-vs-n", "sensors", tuple(range(20, 201, 20)), "sum_rate_bps", _at_sensors),
        Preset("backhaul-utilization", "snr_db", tuple(range(-5, 31, 5)),
               "backhaul_utilization_pct", _at_snr),
        Preset("ee-vs-n", "nodes", tuple(range(20, 201, 20)), "energy_efficiency_bpj", _at_nodes),
        Preset("ee-vs-mtp", "mtp_dbm", tuple(range(10, 44, 3)), "energy_efficiency_bpj", _at_mtp),
    )
}


def sweep_config(config: ScenarioConfig) -> ScenarioConfig:
    """Sweeps only need the radio side and must not abort on outage."""
    return config.with_values(run__frames=0, optimizer__outage_policy="drop")


def run_experiment(preset: str, config: ScenarioConfig, out_dir, grid: Optional[Sequence] = None,
                   replications: Optional[int] = None) -> Path:
    """Sweep ``preset`` and write ``<preset>.csv`` and ``<preset>.manifest.json``."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    p = PRESETS[preset]
    xs = tuple(p.grid if grid is None else grid)
    base = sweep_config(config)
    n = base.run.replications if replications is None else int(replications)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{preset}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for x in xs:
            cfg = p.apply(base, x)
            for scheme in base.run.schemes:
                s = monte_carlo(cfg, n, scheme=scheme)[p.metric]
                w.writerow([x, scheme, repr(s.mean), repr(s.ci_lo), repr(s.ci_hi)])
    write_manifest(out / f"{preset}.manifest.json", base, preset=preset, grid=list(xs),
                   replications=n, metric=p.metric, x_label=p.x_label)
    return path


def write_manifest(path, config: ScenarioConfig, **extra) -> Path:
    manifest = {
        "tool": "mcbmsn",
        "version": __version__,
        "config_sha256": config.digest(),
        "seed_base": config.run.seed_base,
        "rng": "numpy PCG64 seeded through SeedSequence(seed).spawn",
        **extra,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return Path(path)


def read_experiment_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and tuple(rows[0].keys()) != CSV_COLUMNS:
        raise ValueError(f"unexpected columns {tuple(rows[0].keys())}")
    return [{"x": float(r["x"]), "scheme": r["scheme"], "mean": float(r["mean"]),
             "ci_lo": float(r["ci_lo"]), "ci_hi": float(r["ci_hi"])} for r in rows]


def is_saturating(xs: Sequence[float], ys: Sequence[float], rel_tol: float = 0.02) -> bool:
    """Nondecreasing (within ``rel_tol``) and flat over the last third."""
    ys = list(ys)
    if len(ys) < 3:
        return True
    scale = max(abs(y) for y in ys) or 1.0
    rising = all(b >= a - rel_tol * scale for a, b in zip(ys, ys[1:]))
    tail = ys[-max(2, math.ceil(len(ys) / 3)):]
    flat = (max(tail) - min(tail)) <= rel_tol * scale
    return rising and flat
