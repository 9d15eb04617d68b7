import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from afcomb.filters import FilterState, NumericError, VssLmsState, lms_predict, lms_update, vss_lms_step

vec = arrays(np.float64, 4, elements=st.floats(-10, 10))


def test_predict_examples():
    u = np.array([0.3, -1.2, 2.0])
    assert lms_predict(np.zeros(3), u) == 0.0
    assert lms_predict(np.eye(3)[1], u) == -1.2
    assert lms_predict([0.5, -0.5], [2.0, 2.0]) == 0.0


def test_predict_mismatch():
    with pytest.raises(ValueError):
        lms_predict(np.zeros(3), np.zeros(2))


def test_update_examples():
    np.testing.assert_allclose(lms_update([0.0, 0.0], [1.0, 2.0], 1.0, 0.1), [0.1, 0.2])
    w = np.array([0.3, -0.7])
    assert np.array_equal(lms_update(w, [1.0, 2.0], 5.0, 0.0), w)
    assert np.array_equal(lms_update(w, [0.0, 0.0], 5.0, 0.3), w)


def test_update_non_finite():
    with pytest.raises(NumericError):
        lms_update([0.0, 0.0], [1.0, np.inf], 1.0, 0.1)


@given(vec, vec, st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 0.5))
def test_update_affine_in_d(w, u, d1, d2, mu):
    f1 = lms_update(w, u, d1, mu)
    f2 = lms_update(w, u, d2, mu)
    mid = lms_update(w, u, 0.5 * (d1 + d2), mu)
    np.testing.assert_allclose(mid, 0.5 * (f1 + f2), atol=1e-9 * (1 + np.abs(mid).max()))


@given(vec, vec, st.floats(-5, 5), st.floats(0, 0.5))
def test_aposteriori_error(w, u, d, mu):
    new = lms_update(w, u, d, mu)
    lhs = d - u @ new
    rhs = (1 - mu * u @ u) * (d - u @ w)
    assert lhs == pytest.approx(rhs, abs=1e-8 * (1 + abs(d) + np.abs(w).sum() * np.abs(u).sum()) * (1 + mu * u @ u))


def test_filter_state_requires_positive_mu():
    with pytest.raises(ValueError):
        FilterState(np.zeros(2), 0.0)


def test_vss_zero_error():
    s = VssLmsState(np.array([1.0, 2.0]), 0.05)
    new, y, e = vss_lms_step(s, np.array([1.0, 1.0]), 3.0)
    assert e == 0.0 and np.array_equal(new.w, s.w)
    assert new.mu == pytest.approx(0.95 * 0.05)


def test_vss_floor():
    s = VssLmsState(np.zeros(2), 0.005)
    new, _, _ = vss_lms_step(s, np.ones(2), 0.0)
    assert new.mu == 0.005


def test_vss_example():
    s = VssLmsState(np.zeros(1), 0.05, 0.95, 0.1, 0.005, 0.08)
    new, y, e = vss_lms_step(s, np.array([1.0]), 0.2)
    assert e == pytest.approx(0.2)
    assert new.mu == pytest.approx(0.0515)
    # mu first, then the coefficients with the new step
    assert new.w[0] == pytest.approx(0.0515 * 0.2)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50))
def test_vss_clamp(ds):
    s = VssLmsState(np.zeros(3), 0.03)
    u = np.array([0.5, -0.2, 0.1])
    for d in ds:
        s, _, _ = vss_lms_step(s, u, d)
        assert 0.005 <= s.mu <= 0.08
