"""Iterations to reach steady state: cyclic feedback against independent filters.

Usage::

    python3 scripts/stagnation.py configs/stagnation.ini
"""
import argparse
import dataclasses

import numpy as np

from afcomb.config import CombinationSpec, load_config
from afcomb.harness import db, estimate_steady_state, run_ensemble


def iterations_to_steady(emse, window, band_db):
    final = db(estimate_steady_state(emse, window))
    return int(np.nonzero(np.abs(db(emse) - final) <= band_db)[0][0])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--band-db", type=float, default=2.0)
    args = p.parse_args()
    cfg = load_config(args.config)
    ind = dataclasses.replace(cfg, combination=CombinationSpec("independent", cfg.combination.mu1,
                                                               cfg.combination.mu2))
    for name, c in (("cyclic_feedback", cfg), ("independent", ind)):
        t = run_ensemble(c)
        print(name, iterations_to_steady(t["emse"], c.steady_state_window, args.band_db))


if __name__ == "__main__":
    main()
