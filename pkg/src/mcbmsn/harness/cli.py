"""Command-line entry point: ``mcbmsn run | sweep | validate``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..exceptions import ConfigError, InfeasibleInstanceError
from .config import SCHEMES, default_config, dump_config, load_config
from .experiments import PRESETS, run_experiment, write_manifest
from .scenario import records_to_csv, run_scenario
from .stats import summarize_records


def _config(args):
    return load_config(args.config) if args.config else default_config()


def _overrides(cfg, args):
    kw = {}
    if getattr(args, "beamforming", None) is not None:
        kw["run__beamforming"] = args.beamforming == "on"
    if getattr(args, "schemes", None):
        kw["run__schemes"] = list(args.schemes)
    if getattr(args, "seed_base", None) is not None:
        kw["run__seed_base"] = args.seed_base
    return cfg.with_values(**kw) if kw else cfg


def cmd_run(args) -> int:
    cfg = _overrides(_config(args), args)
    schemes = args.schemes or [cfg.run.scheme]
    n = args.replications or 1
    seeds = [args.seed + r for r in range(n)]
    records = [run_scenario(cfg, s, scheme=sch) for sch in schemes for s in seeds]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records_to_csv(records, out / "metrics.csv")
    write_manifest(out / "manifest.json", cfg, seed=args.seed, replications=n, schemes=schemes)
    if n > 1:
        for sch in schemes:
            summ = summarize_records([r for r in records if r.scheme == sch])
            for name, m in summ.metrics.items():
                print(f"{sch:8s} {name:28s} {m.mean:.6g}  [{m.ci_lo:.6g}, {m.ci_hi:.6g}]")
    print(f"wrote {out / 'metrics.csv'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _overrides(_config(args), args)
    presets = list(PRESETS) if args.preset == "all" else [args.preset]
    for p in presets:
        path = run_experiment(p, cfg, args.out, replications=args.replications)
        print(f"wrote {path}")
    return 0


def cmd_validate(args) -> int:
    cfg = _config(args)
    if args.dump:
        sys.stdout.write(dump_config(cfg))
    print(f"ok: {args.config or '<defaults>'} (sha256 {cfg.digest()[:12]})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcbmsn", description="Cache-enabled mobile sensor network simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", help="YAML scenario file (defaults if omitted)")

    run = sub.add_parser("run", help="run one scenario (or a few seeds)")
    common(run)
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("-n", "--replications", type=int, default=None)
    run.add_argument("--schemes", nargs="+", choices=SCHEMES)
    run.add_argument("--beamforming", choices=("on", "off"))
    run.add_argument("-o", "--out", default="out")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a preset experiment")
    common(sweep)
    sweep.add_argument("preset", choices=list(PRESETS) + ["all"])
    sweep.add_argument("-n", "--replications", type=int, default=None)
    sweep.add_argument("--seed-base", type=int, default=None)
    sweep.add_argument("--schemes", nargs="+", choices=SCHEMES)
    sweep.add_argument("-o", "--out", default="out")
    sweep.set_defaults(func=cmd_sweep)

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("config", nargs="?")
    val.add_argument("--dump", action="store_true", help="print the config with defaults applied")
    val.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InfeasibleInstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
