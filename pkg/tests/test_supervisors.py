import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import expit

from afcomb.supervisors import (AFFINE, SIGMOID, Activation, Normalization, SupervisorDivergence,
                                SupervisorState, activation_eval, normalized_power_update,
                                supervisor_update)

finite = st.floats(-50, 50)


def test_activation_examples():
    assert tuple(map(float, activation_eval(Activation(SIGMOID), 0.0))) == (0.5, 0.25, 0.0)
    assert tuple(map(float, activation_eval(Activation(AFFINE), 0.3))) == (0.3, 1.0, 0.0)
    f, fp, fpp = activation_eval(Activation(SIGMOID), 4.0)
    assert f == pytest.approx(0.98201, abs=5e-6)
    assert fp == pytest.approx(0.017663, abs=5e-7)
    assert fpp == pytest.approx(-0.017027, abs=5e-7)


def test_sigmoid_large_argument():
    f, fp, fpp = activation_eval(Activation(SIGMOID), np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(f)) and np.all(np.isfinite(fp)) and np.all(np.isfinite(fpp))
    assert list(f) == [0.0, 1.0]


@given(finite)
def test_sigmoid_derivative_identities(a):
    f, fp, fpp = activation_eval(Activation(SIGMOID), a)
    assert fp == pytest.approx(f * (1 - f))
    assert fpp == pytest.approx(f * (1 - f) * (1 - 2 * f))
    h = 1e-5
    if abs(a) < 20:
        # f' is even; differencing at -|a| avoids cancellation near f = 1
        b = -abs(a)
        num = (expit(b + h) - expit(b - h)) / (2 * h)
        assert fp == pytest.approx(num, rel=1e-5, abs=1e-12)


def test_unknown_activation():
    with pytest.raises(ValueError):
        Activation("tanh")


def test_power_update_examples():
    assert normalized_power_update(0.5, 0.0, 0.9) == pytest.approx(0.05)
    assert normalized_power_update(0.5, 0.3, 1.0) == pytest.approx(0.09)
    assert normalized_power_update(0.5, 0.1, 0.9) == pytest.approx(0.059)


def test_update_example():
    s = SupervisorState.create(SIGMOID, step_size=1.0)
    assert float(s.a) == 0.0 and float(s.eta) == 0.5
    new = supervisor_update(s, 1.0, 0.1, 0.0)
    assert float(new.a) == pytest.approx(0.025)
    assert float(new.eta) == pytest.approx(1 / (1 + np.exp(-0.025)))
    assert float(new.eta) == pytest.approx(0.50625, abs=1e-5)


def test_zero_gradient():
    s = SupervisorState.create(SIGMOID, step_size=5.0, eta_init=0.3)
    assert float(supervisor_update(s, 0.0, 1.0, -1.0).a) == float(s.a)
    assert float(supervisor_update(s, 0.7, 0.2, 0.2).a) == float(s.a)


def test_affine_init():
    s = SupervisorState.create(AFFINE, step_size=1.0)
    assert float(s.a) == 0.5 and s.a_bounds == (-0.25, 1.25)


def test_non_finite():
    s = SupervisorState.create(SIGMOID, step_size=1.0)
    with pytest.raises(SupervisorDivergence):
        supervisor_update(s, np.nan, 1.0, 0.0)


@given(st.lists(st.tuples(finite, finite, finite), min_size=1, max_size=30),
       st.sampled_from([SIGMOID, AFFINE]), st.booleans())
def test_clamp_invariant(seq, kind, normalized):
    s = SupervisorState.create(kind, step_size=50.0, normalization=Normalization() if normalized else None)
    lo, hi = s.a_bounds
    for e, y1, y2 in seq:
        s = supervisor_update(s, e, y1, y2)
        assert lo <= float(s.a) <= hi
        assert float(s.eta) == float(s.activation.value(s.a))
        assert float(s.p) >= 0
    if kind == SIGMOID:
        assert 0.0179 <= float(s.eta) <= 0.9821


@given(st.floats(-4, 4), st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 0.5))
def test_monotone_response(a, g1, g2, step):
    s = SupervisorState(np.float64(a), expit(a), step, Activation(SIGMOID), (-4.0, 4.0))
    lo, hi = sorted((g1, g2))
    assert float(supervisor_update(s, 1.0, lo, 0.0).a) <= float(supervisor_update(s, 1.0, hi, 0.0).a)


@given(st.floats(-4, 4), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 100))
def test_sigmoid_consistency(a, e, y1, y2, mu):
    s = SupervisorState(np.float64(a), expit(a), mu, Activation(SIGMOID), (-4.0, 4.0))
    eta = expit(a)
    ref = np.clip(a + mu * e * (y1 - y2) * eta * (1 - eta), -4, 4)
    assert float(supervisor_update(s, e, y1, y2).a) == pytest.approx(ref, rel=1e-14, abs=1e-14)


@given(st.floats(-0.25, 1.25), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 10))
def test_affine_consistency(eta, e, y1, y2, mu):
    s = SupervisorState(np.float64(eta), np.float64(eta), mu, Activation(AFFINE), (-0.25, 1.25))
    ref = min(max(eta + mu * e * (y1 - y2), -0.25), 1.25)
    new = supervisor_update(s, e, y1, y2)
    assert float(new.eta) == ref


def test_normalized_step():
    s = SupervisorState.create(SIGMOID, step_size=0.5, normalization=Normalization(0.9, 1e-2))
    new = supervisor_update(s, 0.2, 0.1, 0.0)
    p = 0.9 * 0.04
    assert float(new.p) == pytest.approx(p)
    assert float(new.a) == pytest.approx(0.5 / (p + 1e-2) * 0.2 * 0.1 * 0.25)


def test_bad_parameters():
    with pytest.raises(ValueError):
        SupervisorState.create(SIGMOID, a_bounds=(1.0, -1.0))
    with pytest.raises(ValueError):
        Normalization(beta=0.0)
