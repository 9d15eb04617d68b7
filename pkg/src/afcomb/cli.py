"""Command line entry point.

::

    afcomb simulate run.ini --out sim.csv
    afcomb theory run.ini --out theory.csv
    afcomb compare sim.csv theory.csv --band-db 1.5
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .harness import (ExperimentFailure, MetricsTable, TheoryTable, compare, run_ensemble,
                      run_theory)
from .theory import ModelDivergenceError

log = logging.getLogger("afcomb")


def _apply_overrides(cfg, args):
    sc = cfg.scenario
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if changes:
        sc = dataclasses.replace(sc, **changes)
    kw = {"scenario": sc}
    if args.realizations is not None:
        kw["ensemble_size"] = args.realizations
    if getattr(args, "workers", None) is not None:
        kw["workers"] = args.workers
    if args.out is not None:
        kw["output"] = str(args.out)
    return dataclasses.replace(cfg, **kw)


def _out_path(cfg, default):
    return Path(cfg.output) if cfg.output else Path(default)


def cmd_simulate(args):
    cfg = _apply_overrides(load_config(args.config), args)
    table = run_ensemble(cfg)
    out = _out_path(cfg, Path(args.config).with_suffix(".sim.csv"))
    table.to_csv(out)
    if table.baselines:
        table.baselines_to_csv(out.with_name(out.stem + ".baselines.csv"))
    print(f"wrote {out} ({len(table)} rows, {table.diverged} diverged)")
    return 0


def cmd_theory(args):
    cfg = _apply_overrides(load_config(args.config), args)
    table = run_theory(cfg, force_general=args.general)
    out = _out_path(cfg, Path(args.config).with_suffix(".theory.csv"))
    table.to_csv(out)
    meta = out.with_suffix(".json")
    table.write_meta(meta)
    for w in table.meta["warnings"]:
        log.warning(w)
    print(f"wrote {out} and {meta}")
    return 0


def cmd_compare(args):
    sim = MetricsTable.from_csv(args.sim)
    theory = TheoryTable.from_csv(args.theory)
    report = compare(sim, theory, args.band_db, args.min_fraction)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0 if report.passed else 1


def build_parser():
    p = argparse.ArgumentParser(prog="afcomb", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--realizations", type=int)
        sp.add_argument("--horizon", type=int)
        sp.add_argument("--out", type=Path)

    s = sub.add_parser("simulate", help="Monte Carlo ensemble to CSV")
    s.add_argument("config")
    common(s)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("theory", help="transient model to CSV")
    t.add_argument("config")
    common(t)
    t.add_argument("--general", action="store_true",
                   help="use the matrix model even for white input")
    t.set_defaults(func=cmd_theory)

    c = sub.add_parser("compare", help="EMSE gap between two tables")
    c.add_argument("sim")
    c.add_argument("theory")
    c.add_argument("--band-db", type=float, required=True)
    c.add_argument("--min-fraction", type=float, default=1.0,
                   help="fraction of iterations that must lie in the band")
    c.add_argument("--out", type=Path)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ExperimentFailure, ModelDivergenceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
