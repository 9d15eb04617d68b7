"""Run one experiment config: Monte Carlo ensemble, transient model and comparison.

Usage::

    python3 scripts/reproduce.py configs/transient_convex.ini --out results/
"""
import argparse
import json
import logging
from pathlib import Path

from afcomb.config import load_config
from afcomb.harness import compare, db, estimate_steady_state, run_ensemble, run_theory


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--workers", type=int)
    p.add_argument("--band-db", type=float, default=1.5)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO)

    cfg = load_config(args.config)
    stem = Path(args.config).stem
    args.out.mkdir(parents=True, exist_ok=True)
    sim = run_ensemble(cfg, workers=args.workers)
    sim.to_csv(args.out / f"{stem}.sim.csv")
    if sim.baselines:
        sim.baselines_to_csv(args.out / f"{stem}.baselines.csv")
    summary = {"steady_state_emse_db": db(estimate_steady_state(sim["emse"], cfg.steady_state_window)),
               "diverged": sim.diverged}
    try:
        theory = run_theory(cfg)
    except ValueError as exc:
        summary["theory"] = f"unavailable: {exc}"
    else:
        theory.to_csv(args.out / f"{stem}.theory.csv")
        theory.write_meta(args.out / f"{stem}.theory.json")
        summary["compare"] = compare(sim, theory, args.band_db, 0.9).to_dict()
        summary["theory_steady_state"] = theory.meta["steady_state"]
    text = json.dumps(summary, indent=2, default=float)
    (args.out / f"{stem}.summary.json").write_text(text + "\n")
    print(text)


if __name__ == "__main__":
    main()
