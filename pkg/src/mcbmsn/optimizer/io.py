"""Instance and trace files.

An instance is stored as two files side by side: ``<name>.csv`` holds the
gain matrix (one row per station, one column per user) and ``<name>.yaml``
holds the remaining station vectors and scalars.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import yaml

from .radio import RadioInstance

_VECTORS = ("max_power_w", "cache_capacity", "is_macro", "harvest_w", "circuit_power_w")
_SCALARS = ("noise_w", "bandwidth_hz", "bandwidth_share", "min_sinr", "eta", "sharing_index")


def write_instance(instance: RadioInstance, path) -> tuple[Path, Path]:
    path = Path(path).with_suffix(".csv")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"user_{j}" for j in range(instance.n_users)])
        for row in instance.gains:
            w.writerow([repr(float(g)) for g in row])
    block = {"format": "mcbmsn-instance/1"}
    for name in _VECTORS:
        block[name] = np.asarray(getattr(instance, name)).tolist()
    for name in _SCALARS:
        block[name] = float(getattr(instance, name))
    meta = path.with_suffix(".yaml")
    meta.write_text(yaml.safe_dump(block, sort_keys=False))
    return path, meta


def read_instance(path) -> RadioInstance:
    path = Path(path).with_suffix(".csv")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    gains = np.array([[float(v) for v in r] for r in rows[1:]])
    block = yaml.safe_load(path.with_suffix(".yaml").read_text()) or {}
    if block.get("format") != "mcbmsn-instance/1":
        raise ValueError(f"{path.with_suffix('.yaml')}: unknown instance format {block.get('format')!r}")
    kwargs = {k: block[k] for k in _VECTORS + _SCALARS if k in block}
    return RadioInstance(gains=gains, **kwargs)


def write_trace(trace, path) -> Path:
    """Write (iteration, objective, max_violation) rows."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective", "max_violation"])
        for row in trace:
            w.writerow([row["iteration"], repr(float(row["objective"])),
                        repr(float(row["max_violation"]))])
    return path


def read_trace(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return [{"iteration": int(r["iteration"]), "objective": float(r["objective"]),
                 "max_violation": float(r["max_violation"])} for r in csv.DictReader(fh)]
