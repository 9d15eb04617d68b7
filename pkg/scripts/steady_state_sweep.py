"""Steady-state EMSE versus cycle period, simulation against the closed form.

Usage::

    python3 scripts/steady_state_sweep.py configs/tracking.ini --periods 1 10 50 100
"""
import argparse
import csv
import dataclasses
import sys

from afcomb.config import load_config
from afcomb.harness import db, estimate_steady_state, run_ensemble, steady_state_predictions


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--periods", type=float, nargs="+", default=[1, 10, 50, 100])
    p.add_argument("--workers", type=int)
    args = p.parse_args()

    base = load_config(args.config)
    pred = steady_state_predictions(base)[-1]
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["L", "sim_db", "theory_db", "gap_db"])
    for L in args.periods:
        cfg = dataclasses.replace(base, combination=dataclasses.replace(base.combination, cycle_period=L))
        sim = db(estimate_steady_state(run_ensemble(cfg, args.workers)["emse"], cfg.steady_state_window))
        out.writerow([L, f"{sim:.3f}", f"{pred['emse_db']:.3f}", f"{sim - pred['emse_db']:.3f}"])


if __name__ == "__main__":
    main()
