"""Two-filter parallel combinations.

Four topologies are supported. They differ only in how each component
filter obtains its a-priori coefficients and whether coefficients are
transferred after the update:

``independent``
    each filter adapts its own previous coefficients.
``leakage``
    filter 2 is pulled towards the previous coefficients of filter 1 while
    the mixing parameter favours filter 1.
``handover``
    every ``L`` iterations filter 2 is overwritten by filter 1 when the
    mixing parameter favours filter 1.
``cyclic_feedback``
    every ``L`` iterations both filters restart from the global combined
    coefficients. ``L = 1`` turns the combination into a variable step-size
    LMS with step ``eta * mu1 + (1 - eta) * mu2``.

States hold arrays of shape (M,) for a single run or (R, M) for a batch of
realizations advanced in lock-step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filters import lms_predict, lms_update
from .supervisors import SupervisorDivergence, SupervisorState, supervisor_update

INDEPENDENT = "independent"
LEAKAGE = "leakage"
HANDOVER = "handover"
CYCLIC_FEEDBACK = "cyclic_feedback"
TOPOLOGIES = (INDEPENDENT, LEAKAGE, HANDOVER, CYCLIC_FEEDBACK)


class DivergenceError(FloatingPointError):
    """A combination produced non-finite coefficients.

    ``rows`` lists the offending realizations when the state is batched.
    """

    def __init__(self, iteration, rows=()):
        self.iteration = iteration
        self.rows = tuple(int(r) for r in rows)
        where = f" (realizations {list(self.rows)})" if self.rows else ""
        super().__init__(f"combination diverged at iteration {iteration}{where}")


@dataclass(frozen=True)
class Topology:
    kind: str = CYCLIC_FEEDBACK
    cycle_period: float = math.inf
    leak_amount: float = 0.0
    eta_threshold: float = 0.98

    def __post_init__(self):
        if self.kind not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.kind!r}")
        L = self.cycle_period
        if not (L == math.inf or (float(L).is_integer() and L >= 1)):
            raise ValueError(f"cycle period must be a positive integer or inf, got {L}")
        if not 0.0 <= self.leak_amount <= 1.0:
            raise ValueError("leak amount must lie in [0, 1]")

    def on_cycle(self, i: int) -> bool:
        L = self.cycle_period
        return L != math.inf and i % int(L) == 0


@dataclass
class CombinationState:
    w1: np.ndarray
    w2: np.ndarray
    mu1: float
    mu2: float
    supervisor: SupervisorState
    topology: Topology
    w_global: np.ndarray
    i: int = 0

    @classmethod
    def create(cls, filter_length, mu1, mu2, supervisor, topology, batch=None):
        shape = (filter_length,) if batch is None else (batch, filter_length)
        w1 = np.zeros(shape)
        w2 = np.zeros(shape)
        return cls(w1, w2, float(mu1), float(mu2), supervisor, topology,
                   combine_output(supervisor.eta, w1, w2))

    @property
    def eta(self):
        return self.supervisor.eta


@dataclass
class StepDiagnostics:
    y1: np.ndarray
    y2: np.ndarray
    y_global: np.ndarray
    e: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    eta: np.ndarray
    a: np.ndarray
    net_mu: np.ndarray
    e_a: np.ndarray | None = None
    e_a1: np.ndarray | None = None
    e_a2: np.ndarray | None = None


def combine_output(eta, w1, w2):
    """Global coefficients ``eta w1 + (1 - eta) w2``."""
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if w1.shape != w2.shape:
        raise ValueError(f"dimension mismatch: {w1.shape} vs {w2.shape}")
    eta = np.asarray(eta, dtype=float)[..., None]
    return eta * w1 + (1.0 - eta) * w2


def net_step_size(eta, mu1, mu2):
    return eta * mu1 + (1.0 - eta) * mu2


def apriori_coefficients(topology: Topology, i, eta_prev, w1_prev, w2_prev, w_global_prev):
    """Coefficients each filter adapts from at iteration ``i``.

    Only cyclic feedback changes them; leakage and handover act after the
    update.
    """
    if topology.kind == CYCLIC_FEEDBACK and topology.on_cycle(i):
        return w_global_prev, w_global_prev
    return w1_prev, w2_prev


def combination_step(state: CombinationState, u, d, w_o=None, check_finite=True):
    """Advance the combination by one sample.

    Parameters
    ----------
    state : CombinationState
    u : array, shape (..., M)
        Regressor.
    d : float or array
        Desired signal.
    w_o : array, optional
        True system at this iteration, only used for the a-priori error
        diagnostics.
    check_finite : bool
        Raise :class:`DivergenceError` on non-finite coefficients. Batched
        callers that handle divergence themselves can switch it off.

    Returns
    -------
    (CombinationState, StepDiagnostics)
    """
    i = state.i
    sup = state.supervisor
    topo = state.topology
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    eta_prev = sup.eta

    y1 = lms_predict(state.w1, u)
    y2 = lms_predict(state.w2, u)
    y = lms_predict(state.w_global, u)
    e = d - y

    w1a, w2a = apriori_coefficients(topo, i, eta_prev, state.w1, state.w2, state.w_global)
    w1 = lms_update(w1a, u, d, state.mu1, check_finite=False)
    w2 = lms_update(w2a, u, d, state.mu2, check_finite=False)

    if topo.kind == LEAKAGE and topo.leak_amount > 0:
        alpha = topo.leak_amount * (eta_prev >= topo.eta_threshold)
        alpha = np.asarray(alpha, dtype=float)[..., None]
        w2 = alpha * state.w1 + (1.0 - alpha) * w2
    elif topo.kind == HANDOVER and topo.on_cycle(i):
        take = np.asarray(eta_prev >= topo.eta_threshold)[..., None]
        w2 = np.where(take, w1, w2)

    if check_finite:
        ok = np.isfinite(w1).all(axis=-1) & np.isfinite(w2).all(axis=-1) & np.isfinite(e)
        if not np.all(ok):
            raise DivergenceError(i, np.nonzero(~ok)[0] if np.ndim(ok) else ())

    try:
        sup = supervisor_update(sup, e, y1, y2, check_finite)
    except SupervisorDivergence as exc:
        with np.errstate(all="ignore"):
            bad = ~np.isfinite(sup.a + sup.step_size * e * (y1 - y2))
        raise DivergenceError(i, np.nonzero(bad)[0] if np.ndim(bad) else ()) from exc
    w = combine_output(sup.eta, w1, w2)

    diag = StepDiagnostics(y1, y2, y, e, d - y1, d - y2, sup.eta, sup.a,
                           net_step_size(sup.eta, state.mu1, state.mu2))
    if w_o is not None:
        y_o = lms_predict(w_o, u)
        diag.e_a = y_o - y
        diag.e_a1 = y_o - y1
        diag.e_a2 = y_o - y2

    new = CombinationState(w1, w2, state.mu1, state.mu2, sup, topo, w, i + 1)
    return new, diag
