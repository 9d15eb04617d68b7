"""Component adaptive filters.

All functions broadcast over leading axes, so the same code runs one filter
(``w`` of shape (M,)) or a batch of independent realizations (``w`` of
shape (R, M)).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NumericError(FloatingPointError):
    pass


def lms_predict(w, u):
    """Filter output ``u^T w`` along the last axis."""
    w = np.asarray(w, dtype=float)
    u = np.asarray(u, dtype=float)
    if w.shape[-1] != u.shape[-1]:
        raise ValueError(f"dimension mismatch: w has {w.shape[-1]} taps, u has {u.shape[-1]}")
    return np.einsum("...m,...m->...", u, w)


def lms_update(w_a, u, d, mu, check_finite=True):
    """LMS recursion ``w_a + mu * u * (d - u^T w_a)``.

    ``w_a`` are the a-priori coefficients chosen by the combination
    topology. ``mu = 0`` is accepted and returns ``w_a`` unchanged.
    """
    w_a = np.asarray(w_a, dtype=float)
    u = np.asarray(u, dtype=float)
    e = np.asarray(d, dtype=float) - lms_predict(w_a, u)
    w = w_a + (mu * e)[..., None] * u
    if check_finite and not np.all(np.isfinite(w)):
        raise NumericError("non-finite coefficients in LMS update")
    return w


@dataclass
class FilterState:
    w: np.ndarray
    mu: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if not self.mu > 0:
            raise ValueError(f"step size must be positive, got {self.mu}")


@dataclass
class VssLmsState:
    """Variable step-size LMS with a squared-error driven step.

    ``mu`` follows ``clip(decay * mu + gain * e**2, mu_min, mu_max)``.
    ``mu`` may be a scalar or an array with one entry per realization.
    """

    w: np.ndarray
    mu: float | np.ndarray
    decay: float = 0.95
    gain: float = 0.1
    mu_min: float = 0.005
    mu_max: float = 0.08

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if not 0 < self.decay < 1:
            raise ValueError("decay must lie in (0, 1)")
        if not self.gain > 0:
            raise ValueError("gain must be positive")
        if not 0 < self.mu_min <= self.mu_max:
            raise ValueError("need 0 < mu_min <= mu_max")
        self.mu = np.clip(self.mu, self.mu_min, self.mu_max)


def vss_lms_step(state: VssLmsState, u, d):
    """Advance the VSS-LMS filter by one sample.

    The step size is adapted first from the current error and the
    coefficient update then uses the new step size.

    Returns
    -------
    (new_state, y, e)
    """
    y = lms_predict(state.w, u)
    e = np.asarray(d, dtype=float) - y
    mu = np.clip(state.decay * state.mu + state.gain * e * e, state.mu_min, state.mu_max)
    w = state.w + (mu * e)[..., None] * np.asarray(u, dtype=float)
    new = VssLmsState(w, mu, state.decay, state.gain, state.mu_min, state.mu_max)
    return new, y, e
