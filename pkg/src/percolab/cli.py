"""Command-line experiment runner.

Each subcommand runs one experiment from a JSON config file, appends the
run record to <output>/records.jsonl, and renders CSV tables plus figures
alongside it.  The output directory defaults to $PERCOLAB_OUTDIR, then to
./percolab_out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .harness import EXPERIMENTS, ConfigError, ExperimentConfig, append_record, run
from .plots import emit_plots


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="percolab",
        description="Monte Carlo experiments on critical planar percolation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name.replace("_", "-"), help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--master-seed", type=int, default=None, help="override master seed")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument("--output", default=None, help="override output directory")
        p.add_argument("--no-plots", action="store_true", help="skip CSV/figure rendering")
        p.set_defaults(experiment=name)
    sub.add_parser("selftest", help="run the built-in small-instance checks")
    return parser


def _load_config(args) -> ExperimentConfig:
    try:
        raw = json.loads(open(args.config).read())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw.setdefault("experiment", args.experiment)
    if raw["experiment"] != args.experiment:
        raise ConfigError(
            f"config is for {raw['experiment']!r} but the {args.experiment} "
            "subcommand was invoked"
        )
    if args.master_seed is not None:
        raw["master_seed"] = args.master_seed
    if args.workers is not None:
        raw["workers"] = args.workers
    if args.output is not None:
        raw["output"] = args.output
    return ExperimentConfig.from_dict(raw)


def _outdir(config: ExperimentConfig) -> str:
    return config.output or os.environ.get("PERCOLAB_OUTDIR") or "percolab_out"


def _run_experiment(args) -> int:
    config = _load_config(args)
    record = run(config)
    outdir = _outdir(config)
    path = append_record(record, outdir)
    print(f"record appended to {path} (digest {record.results_digest[:16]})")
    if not record.complete:
        print("run interrupted: record marked incomplete, no report rendered", file=sys.stderr)
        return 1
    if not args.no_plots:
        for f in emit_plots(record, outdir):
            print(f"wrote {f}")
    return 0


def _selftest() -> int:
    """Fast exhaustive checks on instances small enough to enumerate."""
    import numpy as np

    from .cardy import cardy_crossing, crossing_formula
    from .clusters import crossing_indicator, duality_xor_check, label_clusters
    from .lattice import LatticeKind, LatticeSpec, enumerate_configurations
    from .rng import SeedSchedule, derive_seed

    failures = 0

    def check(name, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += not ok

    spec = LatticeSpec(LatticeKind.BOND, 3, 2)
    configs = list(enumerate_configurations(spec))
    check("bond 3x2 enumerates 2^12 configurations", len(configs) == 4096)
    check("duality XOR holds for every 3x2 configuration",
          all(duality_xor_check(c) for c in configs))
    crossings = sum(crossing_indicator(c, "left_right") for c in configs)
    check("self-dual crossing probability is exactly 1/2", crossings * 2 == len(configs))

    site = LatticeSpec(LatticeKind.SITE, 4, 4)
    counts_ok = True
    for c in list(enumerate_configurations(site))[:2048]:
        lab = label_clusters(c)
        grid = c.site_grid()
        counts_ok &= lab.cluster_count <= int(grid.sum())
    check("site labeling never exceeds the occupied-site count", counts_ok)

    eta = np.linspace(0.01, 0.99, 25)
    vals = [crossing_formula(x) for x in eta]
    check("crossing formula is strictly increasing",
          all(b > a for a, b in zip(vals, vals[1:])))
    check("crossing formula symmetry F(eta) + F(1-eta) = 1",
          max(abs(crossing_formula(x) + crossing_formula(1 - x) - 1) for x in eta) < 1e-12)
    check("square-aspect prediction is exactly 1/2", cardy_crossing(1.0) == 0.5)

    sched = SeedSchedule(12345)
    seeds = {derive_seed(sched, i) for i in range(10000)}
    check("seed derivation is collision-free over 10^4 streams", len(seeds) == 10000)

    print(f"{'OK' if failures == 0 else 'FAILED'}: "
          f"{8 - failures} of 8 checks passed")
    return 1 if failures else 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "selftest":
        return _selftest()
    try:
        return _run_experiment(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
