"""Command-line entry point.

    dualhop run --config exp.toml --out results/ --seed 7 --profile desk
    dualhop validate --config exp.toml
"""

from __future__ import annotations

import argparse
import sys

from .config import PROFILES, ConfigError, from_dict, load_config
from .runner import ExperimentError, run_experiment


def _load(path):
    return from_dict({}) if path is None else load_config(path)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualhop", description="Regenerate figure data as CSV files.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the configured experiment")
    run.add_argument("--config", help="TOML config file (defaults apply to missing keys)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help="master seed (overrides the config)")
    run.add_argument("--profile", choices=PROFILES, help="desk (1e5 trials) or full (1e6 trials)")
    run.add_argument("--experiment", help="experiment id (overrides the config)")
    val = sub.add_parser("validate", help="check a config file and print the resolved tree")
    val.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args.config)
        if args.command == "validate":
            sys.stdout.write(cfg.dumps())
            return 0
        if args.seed is not None and args.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        cfg = cfg.with_overrides(seed=args.seed, profile=args.profile, experiment=args.experiment)
        arts = run_experiment(cfg, args.out)
    except (ConfigError, ExperimentError, OSError) as exc:
        print(f"dualhop: error: {exc}", file=sys.stderr)
        return 2
    for art in arts:
        print(f"wrote {args.out}/{art.name}.csv ({len(art.rows)} rows)")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
