"""Analytical performance models for two LMS filters with coefficients feedback.

Steady state
    Closed-form global EMSE of the feedback combination (equivalent to a
    standalone LMS with the mean net step size) together with the mixing
    parameter that minimizes it.

Transient
    Recursions for the whitened error covariances of the component filters
    and for the mean and variance of the supervisor's auxiliary variable,
    valid for any smooth activation function and i.i.d. Gaussian regressors.
    A scalar version covers white input.

Iteration convention of the transient model: ``transient_step(state, i)``
reads the covariances of iteration ``i - 1`` held in ``state``, reports the
EMSEs of iteration ``i`` and leaves the covariances of iteration ``i`` in
the returned state. Feedback is applied at the update of iteration ``i``
whenever ``i % L == 0``, exactly as in the simulated combination.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .supervisors import Activation, activation_eval


class StabilityError(ValueError):
    pass


class DegeneratePoolError(ValueError):
    pass


class ModelDivergenceError(FloatingPointError):
    def __init__(self, iteration):
        self.iteration = iteration
        super().__init__(f"transient model diverged at iteration {iteration}")


# ---------------------------------------------------------------------------
# steady state


def steady_state_emse(mu_bar, tr_ru, noise_var, tr_q=0.0):
    """Steady-state EMSE of an LMS filter with (mean) step size ``mu_bar``.

    ``(mu_bar tr(Ru) sv2 + tr(Q) / mu_bar) / (2 - mu_bar tr(Ru))``.
    """
    if mu_bar * tr_ru >= 2:
        raise StabilityError(f"mu_bar * tr(Ru) = {mu_bar * tr_ru:g} >= 2")
    if tr_q > 0 and mu_bar <= 0:
        raise ValueError("a nonstationary plant needs a positive net step size")
    tracking = tr_q / mu_bar if tr_q > 0 else 0.0
    return (mu_bar * tr_ru * noise_var + tracking) / (2.0 - mu_bar * tr_ru)


@dataclass(frozen=True)
class SteadyStateInputs:
    mu1: float
    mu2: float
    tr_ru: float
    noise_var: float
    tr_q: float = 0.0
    eta_range: tuple[float, float] = (-math.inf, math.inf)


def optimal_eta(inp: SteadyStateInputs):
    """Mixing parameter minimizing the steady-state EMSE.

    Returns ``(eta_bar, mu_bar, eta_o)`` where ``eta_o`` is the unconstrained
    minimizer (the root of the stationarity condition with nonnegative net
    step size), ``eta_bar`` its projection onto ``eta_range`` and ``mu_bar``
    the corresponding net step size.

    For a stationary plant ``eta_o = -mu2 / (mu1 - mu2)``, i.e. the unclipped
    optimum drives the net step size to zero.
    """
    mu1, mu2, T, sv2, q = inp.mu1, inp.mu2, inp.tr_ru, inp.noise_var, inp.tr_q
    if mu1 == mu2:
        raise DegeneratePoolError("mu1 == mu2: the mixing parameter has no effect")
    if not T > 0:
        raise ValueError("tr(Ru) must be positive")
    if not sv2 > 0:
        raise ValueError("noise variance must be positive")
    c = math.sqrt(T * T * q * q + 4.0 * sv2 * T * q)
    eta_o = (c - T * (q + 2.0 * mu2 * sv2)) / (2.0 * (mu1 - mu2) * T * sv2)
    lo, hi = inp.eta_range
    eta_bar = min(max(eta_o, lo), hi)
    return eta_bar, eta_bar * mu1 + (1.0 - eta_bar) * mu2, eta_o


def optimal_eta_from_emse(zeta1, zeta2, zeta12):
    """Minimizer of ``eta^2 z1 + 2 eta (1 - eta) z12 + (1 - eta)^2 z2``.

    It is also the fixed point of the mean supervisor recursion.
    """
    dz1 = zeta1 - zeta12
    dz2 = zeta2 - zeta12
    if dz1 + dz2 == 0:
        raise DegeneratePoolError("component filters have identical error statistics")
    return dz2 / (dz1 + dz2)


def feedback_variance_fixed_point(mu1, mu2, eta_bar, tr_ru, noise_var, tr_q=0.0,
                                  tol=1e-15, max_iter=1_000_000):
    """Steady-state EMSE from the coupled component-filter variance relations.

    Iterates the steady-state condition on the global mean-square deviation:
    the per-filter variance and covariance increments (each filter adapts
    the fed-back global coefficients with the global error) are mixed with
    the supervisor weights, and ``zeta`` is moved until the net increment
    vanishes. This path does not use the closed form and is kept to
    cross-check :func:`steady_state_emse`.
    """
    w11 = eta_bar * eta_bar
    w12 = 2.0 * eta_bar * (1.0 - eta_bar)
    w22 = (1.0 - eta_bar) ** 2
    mu_bar = eta_bar * mu1 + (1.0 - eta_bar) * mu2
    if mu_bar * tr_ru >= 2:
        raise StabilityError(f"mu_bar * tr(Ru) = {mu_bar * tr_ru:g} >= 2")
    if mu_bar <= 0:
        if tr_q > 0:
            raise ValueError("a nonstationary plant needs a positive net step size")
        return 0.0

    def msd_increment(zeta):
        mse = zeta + noise_var
        var1 = tr_q - 2.0 * mu1 * zeta + mu1 * mu1 * tr_ru * mse
        var2 = tr_q - 2.0 * mu2 * zeta + mu2 * mu2 * tr_ru * mse
        cov = tr_q - (mu1 + mu2) * zeta + mu1 * mu2 * tr_ru * mse
        return w11 * var1 + w12 * cov + w22 * var2

    zeta = 0.0
    for _ in range(max_iter):
        new = zeta + msd_increment(zeta) / (2.0 * mu_bar)
        if abs(new - zeta) <= tol * max(abs(new), 1e-300):
            return new
        zeta = new
    raise RuntimeError("fixed-point iteration did not converge")


# ---------------------------------------------------------------------------
# transient


@dataclass
class TransientModelState:
    """Whitened second-order statistics of the combination.

    ``k1``, ``k2`` and ``k12`` are ``U^T K U`` for the coefficient-error
    (cross-)covariances, ``lam`` the eigenvalues of ``Ru``.
    """

    lam: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    k12: np.ndarray
    a_mean: float
    a_var: float
    activation: Activation
    step_size: float
    mu1: float
    mu2: float
    noise_var: float
    cycle_period: float = math.inf
    a_bounds: tuple[float, float] = (-math.inf, math.inf)

    @property
    def filter_length(self):
        return self.lam.shape[0]

    def on_cycle(self, i):
        L = self.cycle_period
        return L != math.inf and i % int(L) == 0


@dataclass
class WhiteTransientState:
    """Scalar statistics for ``Ru = input_variance * I``.

    ``zeta1``, ``zeta2``, ``dzeta1`` and ``dzeta2`` are the component EMSEs
    and EMSE/cross-EMSE gaps of the next iteration.
    """

    filter_length: int
    input_variance: float
    zeta1: float
    zeta2: float
    dzeta1: float
    dzeta2: float
    a_mean: float
    a_var: float
    activation: Activation
    step_size: float
    mu1: float
    mu2: float
    noise_var: float
    cycle_period: float = math.inf
    a_bounds: tuple[float, float] = (-math.inf, math.inf)

    on_cycle = TransientModelState.on_cycle


@dataclass(frozen=True)
class TransientOutput:
    emse: float
    emse1: float
    emse2: float
    cross_emse: float
    eta_mean: float
    eta_sq_mean: float
    a_mean: float
    a_var: float


def _eigh(r_u, rel_tol=1e-12):
    r_u = np.asarray(r_u, dtype=float)
    if r_u.ndim != 2 or r_u.shape[0] != r_u.shape[1] or not np.allclose(r_u, r_u.T):
        raise ValueError("Ru must be a symmetric matrix")
    lam, U = np.linalg.eigh(r_u)
    scale = max(float(np.max(np.abs(lam))), np.finfo(float).tiny)
    if np.min(lam) < -1e-10 * scale:
        raise ValueError("Ru is not positive semidefinite")
    lam = np.where(lam < rel_tol * scale, 0.0, lam)
    return lam, U


def transient_init(w_o, r_u, mu1, mu2, noise_var, step_size, activation=None,
                   cycle_period=math.inf, a_bounds=None, a_init=None):
    """Initial model state for zero-initialized component filters.

    ``a_init`` defaults to the auxiliary value giving ``eta = 0.5``.
    """
    activation = activation or Activation()
    lam, U = _eigh(r_u)
    w_hat = U.T @ np.asarray(w_o, dtype=float)
    k = np.outer(w_hat, w_hat)
    bounds = activation.default_bounds() if a_bounds is None else tuple(a_bounds)
    a0 = float(activation.inverse(0.5)) if a_init is None else float(a_init)
    return TransientModelState(lam, k.copy(), k.copy(), k.copy(), a0, 0.0, activation,
                               float(step_size), float(mu1), float(mu2), float(noise_var),
                               cycle_period, bounds)


def white_transient_init(filter_length, input_variance, w_o_norm_sq, mu1, mu2, noise_var,
                         step_size, activation=None, cycle_period=math.inf,
                         a_bounds=None, a_init=None):
    activation = activation or Activation()
    z = input_variance * w_o_norm_sq
    bounds = activation.default_bounds() if a_bounds is None else tuple(a_bounds)
    a0 = float(activation.inverse(0.5)) if a_init is None else float(a_init)
    return WhiteTransientState(int(filter_length), float(input_variance), z, z, 0.0, 0.0, a0, 0.0,
                               activation, float(step_size), float(mu1), float(mu2),
                               float(noise_var), cycle_period, bounds)


def supervisor_moments(activation, a_mean, a_var):
    """First-order (linearized) moments ``(E eta, E eta^2)``."""
    f, fp, _ = activation_eval(activation, a_mean)
    f, fp = float(f), float(fp)
    return f, f * f + a_var * fp * fp


def global_emse(eta_mean, eta_sq_mean, zeta2, dzeta1, dzeta2):
    return eta_sq_mean * (dzeta1 + dzeta2) - 2.0 * eta_mean * dzeta2 + zeta2


def supervisor_statistics_step(activation, a_mean, a_var, step_size, dzeta1, dzeta2, zeta2,
                               noise_var, a_bounds):
    """Mean and variance recursions of the auxiliary variable.

    Both follow the simulated saturation: the mean is clamped to
    ``a_bounds`` and the variance to the largest value a variable confined
    there can have. Without the ceiling the linearized recursion can grow
    without limit once the mean sits on a bound.
    """
    f, fp, fpp = (float(x) for x in activation_eval(activation, a_mean))
    s = dzeta1 + dzeta2
    drift = (1.0 - f) * dzeta2 - f * dzeta1
    g1 = drift * fpp - s * fp * fp
    g2 = (3.0 * fp ** 4 * s * s
          + fpp * fpp * (zeta2 * s + 2.0 * dzeta2 * dzeta2)
          + 3.0 * f * fpp * fpp * s * (f * dzeta1 - (2.0 - f) * dzeta2)
          + 6.0 * fp * fp * fpp * s * (f * dzeta1 - (1.0 - f) * dzeta2)
          + fpp * fpp * s * noise_var)
    gv = fp * fp * (dzeta2 * dzeta2 + s * (2.0 * f * f * s - 4.0 * f * dzeta2 + zeta2 + noise_var))
    mu = step_size
    new_mean = min(max(a_mean + mu * drift * fp, a_bounds[0]), a_bounds[1])
    new_var = max((1.0 + 2.0 * mu * g1 + mu * mu * g2) * a_var + mu * mu * gv, 0.0)
    # a variable confined to [lo, hi] has variance at most ((hi - lo) / 2)^2
    new_var = min(new_var, 0.25 * (a_bounds[1] - a_bounds[0]) ** 2)
    return new_mean, new_var


def _sym(k):
    return 0.5 * (k + k.T)


def transient_step(state: TransientModelState, i: int):
    """One iteration of the matrix transient model.

    Returns ``(new_state, TransientOutput)``.
    """
    lam = state.lam
    sv2 = state.noise_var
    mu1, mu2 = state.mu1, state.mu2
    k1, k2, k12 = state.k1, state.k2, state.k12

    # (i) supervisor moments at i - 1
    e_eta, e_eta2 = supervisor_moments(state.activation, state.a_mean, state.a_var)

    # (ii) EMSEs
    z1 = float(lam @ np.diag(k1))
    z2 = float(lam @ np.diag(k2))
    z12 = float(lam @ np.diag(k12))
    dz1, dz2 = z1 - z12, z2 - z12
    zeta = global_emse(e_eta, e_eta2, z2, dz1, dz2)

    # (iii) covariances
    L = lam[:, None]
    R = lam[None, :]

    def fourth(k):
        # E[u u^T K u u^T] for Gaussian whitened regressors, plus noise term
        return sv2 * np.diag(lam) + np.diag(lam) * float(lam @ np.diag(k)) + L * (k + k.T) * R

    if state.on_cycle(i):
        kg = (e_eta2 * k1 + (e_eta - e_eta2) * (k12 + k12.T)
              + (1.0 - 2.0 * e_eta + e_eta2) * k2)
        kg = _sym(kg)
        A = fourth(kg)
        n1 = kg - mu1 * (kg * R + L * kg) + mu1 * mu1 * A
        n2 = kg - mu2 * (kg * R + L * kg) + mu2 * mu2 * A
        n12 = kg - mu1 * L * kg - mu2 * kg * R + mu1 * mu2 * A
    else:
        n1 = k1 - mu1 * (k1 * R + L * k1) + mu1 * mu1 * fourth(k1)
        n2 = k2 - mu2 * (k2 * R + L * k2) + mu2 * mu2 * fourth(k2)
        n12 = k12 - mu1 * L * k12 - mu2 * k12 * R + mu1 * mu2 * fourth(k12)
    n1, n2 = _sym(n1), _sym(n2)

    # (iv) supervisor
    a_mean, a_var = supervisor_statistics_step(state.activation, state.a_mean, state.a_var,
                                               state.step_size, dz1, dz2, z2, sv2, state.a_bounds)
    if not (np.all(np.isfinite(n1)) and np.all(np.isfinite(n2)) and np.all(np.isfinite(n12))
            and math.isfinite(a_mean) and math.isfinite(a_var)):
        raise ModelDivergenceError(i)

    new = replace(state, k1=n1, k2=n2, k12=n12, a_mean=a_mean, a_var=a_var)
    eta, eta2 = supervisor_moments(state.activation, a_mean, a_var)
    return new, TransientOutput(zeta, z1, z2, z12, eta, eta2, a_mean, a_var)


def transient_step_white(state: WhiteTransientState, i: int):
    """Scalar transient recursions for white input.

    Same outputs and convention as :func:`transient_step`.
    """
    M = state.filter_length
    s2 = state.input_variance
    sv2 = state.noise_var
    mu = (state.mu1, state.mu2)
    noise = M * s2 * s2 * sv2

    e_eta, e_eta2 = supervisor_moments(state.activation, state.a_mean, state.a_var)
    z1, z2 = state.zeta1, state.zeta2
    dz1, dz2 = state.dzeta1, state.dzeta2
    z12 = z2 - dz2
    zeta = global_emse(e_eta, e_eta2, z2, dz1, dz2)

    a = [1.0 - 2.0 * m * s2 + m * m * (M + 2) * s2 * s2 for m in mu]
    b = [1.0 - m * (M + 2) * s2 for m in mu]
    z = (z1, z2)
    dz = (dz1, dz2)
    nz, ndz = [0.0, 0.0], [0.0, 0.0]
    for n in range(2):
        mn, mm = mu[n], mu[1 - n]
        if state.on_cycle(i):
            nz[n] = a[n] * zeta + mn * mn * noise
            ndz[n] = (mm - mn) * s2 * (b[n] * zeta - mn * M * s2 * sv2)
        else:
            nz[n] = a[n] * z[n] + mn * mn * noise
            ndz[n] = ((1.0 - mn * s2) * dz[n] - s2 * b[n] * (mn * z[n] - mm * z12)
                      + mn * (mn - mm) * noise)

    a_mean, a_var = supervisor_statistics_step(state.activation, state.a_mean, state.a_var,
                                               state.step_size, dz1, dz2, z2, sv2, state.a_bounds)
    if not all(math.isfinite(x) for x in (*nz, *ndz, a_mean, a_var)):
        raise ModelDivergenceError(i)
    new = replace(state, zeta1=nz[0], zeta2=nz[1], dzeta1=ndz[0], dzeta2=ndz[1],
                  a_mean=a_mean, a_var=a_var)
    eta, eta2 = supervisor_moments(state.activation, a_mean, a_var)
    return new, TransientOutput(zeta, z1, z2, z12, eta, eta2, a_mean, a_var)


def run_transient(state, horizon):
    """Run a transient model for ``horizon`` iterations.

    Works with either state type and returns a dict of arrays keyed like
    :class:`TransientOutput`.
    """
    step = transient_step_white if isinstance(state, WhiteTransientState) else transient_step
    names = TransientOutput.__dataclass_fields__
    out = {k: np.empty(horizon) for k in names}
    for i in range(horizon):
        state, row = step(state, i)
        for k in names:
            out[k][i] = getattr(row, k)
    return out
