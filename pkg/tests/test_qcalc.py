import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from tsallis_robust.errors import DomainError, ParameterError
from tsallis_robust.qcalc import QParams, exp_q, ln_q, mu, mu_via_exp_q

Q_VALUES = (1.5, 2.0, 3.0)


def test_ln_q_at_one_is_zero():
    for q in (1.2, 1.5, 2.0, 3.0, 7.0):
        assert ln_q(1.0, QParams(q, 1.0)) == 0.0


def test_ln_q_two_at_q2():
    assert ln_q(2.0, QParams(2.0, 1.0)) == pytest.approx(0.5, abs=1e-15)


def test_exp_q_values():
    p = QParams(2.0, 1.0)
    assert exp_q(0.0, p) == 1.0
    assert exp_q(-1.0, p) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("q", Q_VALUES)
@pytest.mark.parametrize("x", [0.1, 1.0, 7.3])
def test_exp_ln_round_trip(q, x):
    p = QParams(q, 1.0)
    assert exp_q(ln_q(x, p), p) == pytest.approx(x, abs=1e-12)


def test_near_one_limit_matches_natural_log():
    p = QParams(1.000001, 1.0)
    xs = np.logspace(-2, 2, 41)
    assert np.max(np.abs(ln_q(xs, p) - np.log(xs))) <= 1e-4
    assert np.max(np.abs(exp_q(np.linspace(-3, 3, 13), p) - np.exp(np.linspace(-3, 3, 13)))) <= 1e-4


def test_ln_q_against_high_precision():
    mpmath.mp.dps = 40
    for q in (1.5, 2.0, 3.0, 4.25):
        p = QParams(q, 1.0)
        for x in (0.01, 0.37, 1.9, 55.0):
            ref = (mpmath.mpf(x) ** (1 - mpmath.mpf(q)) - 1) / (1 - mpmath.mpf(q))
            assert ln_q(x, p) == pytest.approx(float(ref), rel=1e-13, abs=1e-15)


def test_mu_values():
    assert mu(0.0, QParams(2.0, 1.0)) == pytest.approx(0.5)
    assert mu(0.0, QParams(3.0, 0.7)) == pytest.approx(1.0 / 3.0)
    assert mu(1.0, QParams(2.0, 1.0)) == pytest.approx(1.0)


def test_mu_identity_on_random_points(rng):
    for q in Q_VALUES:
        for gamma in (0.5, 1.0, 2.0):
            p = QParams(q, gamma)
            y = rng.uniform(0.0, 20.0, 200)
            assert np.max(np.abs(mu(y, p) - mu_via_exp_q(y, p))) <= 1e-12


def test_array_shapes_preserved():
    p = QParams(2.0, 1.0)
    x = np.array([[0.5, 1.0], [2.0, 4.0]])
    assert ln_q(x, p).shape == (2, 2)
    assert isinstance(ln_q(2.0, p), float)
    assert isinstance(exp_q(0.3, p), float)


def test_parameter_validation():
    with pytest.raises(ParameterError):
        QParams(1.0, 1.0)
    with pytest.raises(ParameterError):
        QParams(2.0, 0.0)
    with pytest.raises(ParameterError):
        QParams(0.5, 1.0)
    with pytest.raises(ParameterError):
        QParams(-1.0, 1.0)
    with pytest.warns(RuntimeWarning):
        QParams(0.5, 1.0, experimental=True)


def test_domain_errors():
    p = QParams(2.0, 1.0)
    with pytest.raises(DomainError):
        ln_q(0.0, p)
    with pytest.raises(DomainError):
        ln_q(-1.0, p)
    with pytest.raises(DomainError):
        exp_q(1.0, p)  # 1 + (1-q) x = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        small = QParams(0.5, 3.0, experimental=True)
    with pytest.raises(DomainError):
        mu(1.0, small)  # 1 - 0.5 * 3 < 0


def test_experimental_q_below_one_round_trip():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        p = QParams(0.5, 1.0, experimental=True)
    for x in (0.2, 1.0, 3.0):
        assert exp_q(ln_q(x, p), p) == pytest.approx(x, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    x=st.floats(1e-6, 1e6),
    q=st.floats(1.01, 5.0),
)
def test_round_trip_property(x, q):
    # below this x**(1-q) is lost against 1 in double precision
    assume(x ** (1.0 - q) >= 1e-12)
    p = QParams(q, 1.0)
    # recovering x cancels 1 against (q-1) ln_q(x); rounding grows like x**(q-1)
    cond = max(1.0, x ** (q - 1.0))
    assert exp_q(ln_q(x, p), p) == pytest.approx(x, rel=1e-14 * cond)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(1e-4, 1e4),
    b=st.floats(1e-4, 1e4),
    q=st.floats(1.01, 5.0),
)
def test_ln_q_strictly_increasing(a, b, q):
    p = QParams(q, 1.0)
    if a < b * (1 - 1e-9):
        assert ln_q(a, p) < ln_q(b, p)


@settings(max_examples=200, deadline=None)
@given(y=st.floats(0.0, 50.0), q=st.floats(1.01, 5.0), gamma=st.floats(0.05, 5.0))
def test_mu_identity_property(y, q, gamma):
    p = QParams(q, gamma)
    assert mu(y, p) == pytest.approx(mu_via_exp_q(y, p), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-50.0, 50.0), q=st.floats(1.01, 5.0))
def test_exp_q_positive_and_increasing_where_defined(x, q):
    p = QParams(q, 1.0)
    if 1 + (1 - q) * x <= 1e-9:
        return
    assert exp_q(x, p) > 0
    assert exp_q(x - 0.01, p) < exp_q(x, p)
    # for q > 1, exp_q dominates exp on its domain
    assert exp_q(x, p) >= math.exp(x) * (1 - 1e-12)
