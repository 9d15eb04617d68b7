"""Mixing-parameter supervisors.

A supervisor adapts an auxiliary variable ``a`` by stochastic gradient on
the global squared error and maps it through a strictly increasing
activation ``f`` to the mixing parameter ``eta = f(a)``. The identity gives
the affine supervisor and the logistic function the convex one. Either can
be normalized by a running estimate of the error power.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

AFFINE = "affine"
SIGMOID = "sigmoid"

# default saturation of the auxiliary variable
CONVEX_A_BOUNDS = (-4.0, 4.0)
AFFINE_A_BOUNDS = (-0.25, 1.25)


@dataclass(frozen=True)
class Activation:
    kind: str = SIGMOID

    def __post_init__(self):
        if self.kind not in (AFFINE, SIGMOID):
            raise ValueError(f"unknown activation {self.kind!r}")

    def __call__(self, a):
        return activation_eval(self, a)

    def value(self, a):
        return expit(a) if self.kind == SIGMOID else np.asarray(a, dtype=float) * 1.0

    def inverse(self, eta):
        return logit(eta) if self.kind == SIGMOID else eta

    def default_bounds(self):
        return CONVEX_A_BOUNDS if self.kind == SIGMOID else AFFINE_A_BOUNDS


def activation_eval(act: Activation, a):
    """Return ``(f(a), f'(a), f''(a))``.

    The logistic is evaluated with ``expit`` (overflow free for any finite
    ``a``) and its derivatives through ``f' = f(1-f)``, ``f'' = f'(1-2f)``.
    """
    if act.kind == AFFINE:
        a = np.asarray(a, dtype=float)
        return a * 1.0, np.ones_like(a), np.zeros_like(a)
    f = expit(a)
    fp = f * (1.0 - f)
    return f, fp, fp * (1.0 - 2.0 * f)


def normalized_power_update(p, e, beta):
    """Exponentially weighted error power ``beta e^2 + (1 - beta) p``."""
    return beta * np.square(e) + (1.0 - beta) * p


@dataclass(frozen=True)
class Normalization:
    """Error-power normalization: effective step ``mu_tilde / (p + eps)``."""

    beta: float = 0.9
    eps: float = 1e-2

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if not self.eps >= 0:
            raise ValueError("eps must be nonnegative")


@dataclass
class SupervisorState:
    """State of a two-filter supervisor.

    ``a`` and ``eta`` are scalars or arrays with one entry per realization.
    With normalization active, ``step_size`` is the normalized step and
    ``p`` the running error power.
    """

    a: np.ndarray
    eta: np.ndarray
    step_size: float
    activation: Activation
    a_bounds: tuple[float, float]
    normalization: Normalization | None = None
    p: np.ndarray | float = 0.0

    @classmethod
    def create(cls, kind=SIGMOID, step_size=1.0, a_bounds=None, eta_init=0.5,
               normalization=None, shape=()):
        act = Activation(kind)
        lo, hi = act.default_bounds() if a_bounds is None else a_bounds
        if not lo < hi:
            raise ValueError("need a_min < a_max")
        if not step_size >= 0:
            raise ValueError("supervisor step size must be nonnegative")
        a0 = float(np.clip(act.inverse(eta_init), lo, hi))
        a = np.full(shape, a0)
        return cls(a, act.value(a), float(step_size), act, (float(lo), float(hi)),
                   normalization, np.zeros(shape))

    @property
    def eta_bounds(self):
        return tuple(float(self.activation.value(b)) for b in self.a_bounds)


class SupervisorDivergence(FloatingPointError):
    pass


def supervisor_update(state: SupervisorState, e, y1, y2, check_finite=True) -> SupervisorState:
    """One gradient step of the supervisor.

    ``a <- clip(a + step * e * (y1 - y2) * f'(a), a_min, a_max)`` where the
    derivative is taken at the stored (already saturated) ``a``.
    """
    _, fp, _ = activation_eval(state.activation, state.a)
    p = state.p
    if state.normalization is None:
        step = state.step_size
    else:
        norm = state.normalization
        p = normalized_power_update(state.p, e, norm.beta)
        step = state.step_size / (p + norm.eps)
    a = state.a + step * e * (y1 - y2) * fp
    if check_finite and not np.all(np.isfinite(a)):
        raise SupervisorDivergence("non-finite auxiliary variable a in supervisor update")
    a = np.clip(a, *state.a_bounds)
    return SupervisorState(a, state.activation.value(a), state.step_size, state.activation,
                           state.a_bounds, state.normalization, p)
