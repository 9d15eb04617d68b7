"""Monte Carlo ensembles, theory tables and their comparison.

Realizations are split into fixed-size chunks. A chunk advances all of its
realizations in lock-step (the state arrays carry one row per
realization) and returns per-iteration sums; chunk sums are then reduced in
chunk order in extended precision. The chunking depends only on the
configuration, so the output does not depend on the number of workers.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .combinations import CYCLIC_FEEDBACK, INDEPENDENT, CombinationState, combination_step
from .config import ExperimentConfig
from .filters import lms_predict
from .scenario import BatchStream, initial_plant
from .supervisors import AFFINE, Activation
from .theory import (SteadyStateInputs, optimal_eta, run_transient, steady_state_emse,
                     transient_init, white_transient_init)

log = logging.getLogger(__name__)

COLUMNS = ("i", "emse", "emse1", "emse2", "cross_emse", "eta_mean", "a_mean",
           "eta_sq_mean", "net_mu", "n_realizations")
THEORY_COLUMNS = ("i", "emse_db", "emse1_db", "emse2_db", "cross_emse", "eta_mean",
                  "a_mean", "a_var")
_SUMMED = COLUMNS[1:-1]
# accumulated but kept out of the CSV contract
_EXTRA = ("a_sq_mean",)

BLOCK = 512
MAX_DIVERGED_FRACTION = 0.01


class ExperimentFailure(RuntimeError):
    pass


def db(x):
    """``10 log10(x)``; zero maps to ``-inf``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


# ---------------------------------------------------------------------------
# tables


def _write_csv(path, header, columns):
    path = Path(path)
    n = len(columns[0])
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k in range(n):
                w.writerow([_cell(col[k]) for col in columns])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _cell(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _read_csv(path):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path} is empty")
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(len(rows) - 1, len(header))
    return {h: data[:, k] for k, h in enumerate(header)}


@dataclass
class MetricsTable:
    """Per-iteration ensemble means of the simulated combination."""

    columns: dict
    diverged: int = 0
    baselines: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def a_var(self):
        """Ensemble variance of the auxiliary variable (needs ``extras``)."""
        return np.maximum(self.extras["a_sq_mean"] - self.columns["a_mean"] ** 2, 0.0)

    def __getitem__(self, key):
        return self.columns[key]

    def __len__(self):
        return len(self.columns["i"])

    def to_csv(self, path):
        _write_csv(path, COLUMNS, [self.columns[c] for c in COLUMNS])

    def baselines_to_csv(self, path):
        names = list(self.baselines)
        _write_csv(path, ["i"] + names, [self.columns["i"]] + [self.baselines[n] for n in names])

    @classmethod
    def from_csv(cls, path):
        cols = _read_csv(path)
        missing = [c for c in COLUMNS if c not in cols]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        cols["i"] = cols["i"].astype(int)
        cols["n_realizations"] = cols["n_realizations"].astype(int)
        return cls({c: cols[c] for c in COLUMNS})


@dataclass
class TheoryTable:
    columns: dict
    meta: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.columns[key]

    def __len__(self):
        return len(self.columns["i"])

    def to_csv(self, path):
        _write_csv(path, THEORY_COLUMNS, [self.columns[c] for c in THEORY_COLUMNS])

    def write_meta(self, path):
        Path(path).write_text(json.dumps(self.meta, indent=2, default=_json_default) + "\n")

    @classmethod
    def from_csv(cls, path):
        cols = _read_csv(path)
        missing = [c for c in THEORY_COLUMNS if c not in cols]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        cols["i"] = cols["i"].astype(int)
        return cls({c: cols[c] for c in THEORY_COLUMNS})


def _json_default(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(type(v))


# ---------------------------------------------------------------------------
# simulation


def _chunks(cfg: ExperimentConfig):
    n, size = cfg.ensemble_size, cfg.chunk_size
    return [list(range(s, min(s + size, n))) for s in range(0, n, size)]


def _baseline_filters(cfg, rows, m):
    b = cfg.baselines
    lms = {f"lms_{mu!r}": (float(mu), np.zeros((rows, m))) for mu in b.lms_step_sizes}
    vss = None
    if b.vss_lms:
        mu0 = b.vss_mu_max if b.vss_mu_init is None else b.vss_mu_init
        vss = [np.zeros((rows, m)), np.full(rows, float(mu0))]
    return lms, vss


def simulate_chunk(cfg: ExperimentConfig, realizations):
    """Run a batch of realizations.

    Returns ``(sums, baseline_sums, diverged)`` where ``sums`` maps each
    averaged column to its per-iteration sum over the surviving
    realizations and ``diverged`` lists the realization indices that
    produced non-finite values.
    """
    realizations = list(realizations)
    sc = cfg.scenario
    H, M, R = sc.horizon, sc.filter_length, len(realizations)
    comb = cfg.combination
    state = CombinationState.create(M, comb.mu1, comb.mu2, cfg.supervisor.build((R,)),
                                    comb.build(), batch=R)
    lms, vss = _baseline_filters(cfg, R, M)
    b = cfg.baselines

    sums = {c: np.zeros(H, dtype=np.longdouble) for c in _SUMMED + _EXTRA}
    base_sums = {k: np.zeros(H, dtype=np.longdouble) for k in lms}
    if vss is not None:
        base_sums["vss_lms"] = np.zeros(H, dtype=np.longdouble)
    finite = np.ones(R, dtype=bool)

    stream = BatchStream(sc, realizations)
    with np.errstate(all="ignore"):
        for block in stream.blocks(BLOCK):
            B = len(block)
            u = np.ascontiguousarray(block.u.transpose(1, 0, 2))
            d = np.ascontiguousarray(block.d.T)
            w_o = np.ascontiguousarray(block.w_o.transpose(1, 0, 2))
            y_o = lms_predict(w_o, u)
            buf = {c: np.empty((B, R)) for c in ("emse", "emse1", "emse2", "cross_emse",
                                                 "eta_mean", "a_mean")}
            bbuf = {k: np.empty((B, R)) for k in base_sums}
            for k in range(B):
                uk = u[k]
                state, dg = combination_step(state, uk, d[k], check_finite=False)
                ea, ea1, ea2 = y_o[k] - dg.y_global, y_o[k] - dg.y1, y_o[k] - dg.y2
                buf["emse"][k] = ea * ea
                buf["emse1"][k] = ea1 * ea1
                buf["emse2"][k] = ea2 * ea2
                buf["cross_emse"][k] = ea1 * ea2
                buf["eta_mean"][k] = dg.eta
                buf["a_mean"][k] = dg.a
                for name, (mu, w) in lms.items():
                    y = lms_predict(w, uk)
                    e = y_o[k] - y
                    bbuf[name][k] = e * e
                    w += (mu * (d[k] - y))[:, None] * uk
                if vss is not None:
                    w, mu = vss
                    y = lms_predict(w, uk)
                    e = y_o[k] - y
                    bbuf["vss_lms"][k] = e * e
                    err = d[k] - y
                    mu = np.clip(b.vss_decay * mu + b.vss_gain * err * err, b.vss_mu_min, b.vss_mu_max)
                    w += (mu * err)[:, None] * uk
                    vss[1] = mu
            eta = buf["eta_mean"]
            a = buf["a_mean"]
            derived = {"eta_sq_mean": eta * eta, "a_sq_mean": a * a, "net_mu": eta * comb.mu1 + (1.0 - eta) * comb.mu2}
            allbuf = {**buf, **derived}
            for v in list(allbuf.values()) + list(bbuf.values()):
                finite &= np.all(np.isfinite(v), axis=0)
            sl = slice(block.start, block.start + B)
            for c in _SUMMED + _EXTRA:
                sums[c][sl] = allbuf[c][:, finite].astype(np.longdouble).sum(axis=1)
            for name in base_sums:
                base_sums[name][sl] = bbuf[name][:, finite].astype(np.longdouble).sum(axis=1)
    diverged = [r for r, ok in zip(realizations, finite) if not ok]
    return sums, base_sums, diverged


def _run_chunk_clean(cfg, realizations):
    """Simulate a chunk, rerunning it without realizations that diverged."""
    sums, base, diverged = simulate_chunk(cfg, realizations)
    if diverged:
        keep = [r for r in realizations if r not in set(diverged)]
        if keep:
            sums, base, again = simulate_chunk(cfg, keep)
            assert not again, "realizations are independent; a rerun cannot diverge anew"
        else:
            H = cfg.scenario.horizon
            sums = {c: np.zeros(H, dtype=np.longdouble) for c in sums}
            base = {c: np.zeros(H, dtype=np.longdouble) for c in base}
        return sums, base, diverged, len(keep)
    return sums, base, diverged, len(realizations)


def run_ensemble(cfg: ExperimentConfig, workers: int | None = None) -> MetricsTable:
    """Ensemble means over ``cfg.ensemble_size`` realizations.

    Realizations whose coefficients blow up are dropped from every
    iteration and counted; more than 1% of them is treated as a
    misconfigured experiment.
    """
    workers = cfg.workers if workers is None else workers
    chunks = _chunks(cfg)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk_clean, [cfg] * len(chunks), chunks))
    else:
        results = [_run_chunk_clean(cfg, c) for c in chunks]

    H = cfg.scenario.horizon
    total = {c: np.zeros(H, dtype=np.longdouble) for c in _SUMMED + _EXTRA}
    base_total = {}
    count = 0
    diverged = []
    for sums, base, div, kept in results:
        for c in _SUMMED + _EXTRA:
            total[c] += sums[c]
        for k, v in base.items():
            base_total[k] = base_total.get(k, 0) + v
        count += kept
        diverged += div
    if len(diverged) > MAX_DIVERGED_FRACTION * cfg.ensemble_size:
        raise ExperimentFailure(
            f"{len(diverged)} of {cfg.ensemble_size} realizations diverged "
            f"(first: {diverged[:5]}); check step sizes")
    if diverged:
        log.warning("dropped %d diverged realizations: %s", len(diverged), diverged)
    if count == 0:
        raise ExperimentFailure("no realization survived")
    cols = {"i": np.arange(H)}
    for c in _SUMMED:
        cols[c] = np.asarray(total[c] / count, dtype=float)
    cols["n_realizations"] = np.full(H, count, dtype=int)
    baselines = {k: np.asarray(v / count, dtype=float) for k, v in base_total.items()}
    extras = {c: np.asarray(total[c] / count, dtype=float) for c in _EXTRA}
    return MetricsTable(cols, len(diverged), baselines, extras)


def estimate_steady_state(series, window):
    """Mean of the last ``window`` entries."""
    series = np.asarray(series, dtype=float)
    if not 1 <= window <= len(series):
        raise ValueError(f"window {window} outside 1..{len(series)}")
    return float(np.mean(series[len(series) - window:]))


# ---------------------------------------------------------------------------
# theory


def steady_state_predictions(cfg: ExperimentConfig):
    """Closed-form steady-state line for each phase of the noise schedule."""
    sc = cfg.scenario
    act = Activation(cfg.supervisor.activation_kind)
    bounds = cfg.supervisor.a_bounds or act.default_bounds()
    eta_range = tuple(float(act.value(b)) for b in bounds)
    tr_ru = sc.filter_length * sc.input_variance
    out = []
    for start, q in sc.process_noise_schedule:
        inp = SteadyStateInputs(cfg.combination.mu1, cfg.combination.mu2, tr_ru,
                                sc.noise_variance, sc.filter_length * q, eta_range)
        eta_bar, mu_bar, eta_o = optimal_eta(inp)
        zeta = steady_state_emse(mu_bar, tr_ru, sc.noise_variance, inp.tr_q)
        out.append(dict(start=start, process_noise=q, eta_o=eta_o, eta_bar=eta_bar,
                        mu_bar=mu_bar, emse=zeta, emse_db=float(db(zeta))))
    return out


def run_theory(cfg: ExperimentConfig, force_general=False) -> TheoryTable:
    """Transient model trajectory (plus steady-state lines) for a config.

    White input selects the scalar recursions unless ``force_general``.
    """
    comb = cfg.combination
    if comb.topology == CYCLIC_FEEDBACK:
        L = comb.cycle_period
    elif comb.topology == INDEPENDENT:
        L = math.inf
    else:
        raise ValueError(f"no transient model for topology {comb.topology!r}")
    sc = cfg.scenario
    sup = cfg.supervisor
    act = Activation(sup.activation_kind)
    w_o = initial_plant(sc)
    a_init = float(np.clip(act.inverse(sup.eta_init), *(sup.a_bounds or act.default_bounds())))
    common = dict(step_size=sup.step_size, activation=act, cycle_period=L,
                  a_bounds=sup.a_bounds, a_init=a_init)
    meta = {"warnings": [], "cycle_period": L}
    if sc.is_white and not force_general:
        state = white_transient_init(sc.filter_length, sc.input_variance, float(w_o @ w_o),
                                     comb.mu1, comb.mu2, sc.noise_variance, **common)
        meta["model"] = "white"
    else:
        state = transient_init(w_o, sc.input_covariance(), comb.mu1, comb.mu2,
                               sc.noise_variance, **common)
        meta["model"] = "general"
    if any(q > 0 for _, q in sc.process_noise_schedule):
        meta["warnings"].append("transient model assumes a stationary plant; random walk ignored")
    if sup.normalized:
        meta["warnings"].append("transient model uses the unnormalized supervisor with mu_a = step_size")
    if sup.activation_kind == AFFINE and any(q == 0 for _, q in sc.process_noise_schedule):
        meta["warnings"].append(
            "steady-state model unreliable for the affine supervisor in a stationary scenario")
    try:
        meta["steady_state"] = steady_state_predictions(cfg)
    except ValueError as exc:
        meta["steady_state"] = []
        meta["warnings"].append(f"no steady-state prediction: {exc}")

    out = run_transient(state, sc.horizon)
    cols = {
        "i": np.arange(sc.horizon),
        "emse_db": db(out["emse"]),
        "emse1_db": db(out["emse1"]),
        "emse2_db": db(out["emse2"]),
        "cross_emse": out["cross_emse"],
        "eta_mean": out["eta_mean"],
        "a_mean": out["a_mean"],
        "a_var": out["a_var"],
    }
    return TheoryTable(cols, meta)


# ---------------------------------------------------------------------------
# comparison


def _emse_db(table):
    cols = table.columns if hasattr(table, "columns") else table
    if "emse_db" in cols:
        return np.asarray(cols["emse_db"], dtype=float)
    return db(cols["emse"])


@dataclass
class ComparisonReport:
    diff_db: np.ndarray
    band_db: float
    max_abs_db: float
    mean_abs_db: float
    fraction_within: float
    min_fraction: float

    @property
    def passed(self):
        return self.fraction_within >= self.min_fraction

    def to_dict(self):
        return dict(n=int(self.diff_db.size), band_db=self.band_db, max_abs_db=self.max_abs_db,
                    mean_abs_db=self.mean_abs_db, fraction_within=self.fraction_within,
                    min_fraction=self.min_fraction, passed=self.passed)


def compare(sim, theory, band_db, min_fraction=1.0) -> ComparisonReport:
    """Per-iteration dB gap between two EMSE curves.

    Either argument may be a :class:`MetricsTable`, a :class:`TheoryTable`
    or a plain column dict holding ``i`` and ``emse`` or ``emse_db``.
    """
    ci = np.asarray((sim.columns if hasattr(sim, "columns") else sim)["i"])
    ti = np.asarray((theory.columns if hasattr(theory, "columns") else theory)["i"])
    if ci.shape != ti.shape or np.any(ci != ti):
        raise ValueError("iteration axes differ")
    a, b = _emse_db(sim), _emse_db(theory)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        diff = b - a
        # equal infinities count as agreement
        diff = np.where(a == b, 0.0, diff)
        diff = np.where(np.isnan(diff), np.inf, diff)
    absd = np.abs(diff)
    return ComparisonReport(diff, float(band_db), float(np.max(absd)), float(np.mean(absd)),
                            float(np.mean(absd <= band_db)), float(min_fraction))
