import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfpower import (
    ArgumentError,
    DiscreteChannelModel,
    asymmetric_rate_unclamped,
    classify_states,
    expected_rate,
    misalignment,
    order_criterion,
    symmetric_rate_unclamped,
)
from cfpower.rates import as_coefficients, clamped, make_report, symmetric_rate_slope

from conftest import A, REMARK_P1, REMARK_P2

gain = st.floats(0.01, 10.0)
gains2 = st.tuples(gain, gain)
coef = st.tuples(st.integers(-4, 4), st.integers(-4, 4)).filter(any)


# -- misalignment ---------------------------------------------------------------

@pytest.mark.parametrize("h,expected", [((1, 1), 0.0), ((1, 0.5), 0.25), ((3, 2), 1.0)])
def test_misalignment_examples(h, expected):
    assert misalignment(h, A) == pytest.approx(expected, abs=1e-15)


def test_misalignment_dimension_mismatch():
    with pytest.raises(ArgumentError):
        misalignment((1, 2, 3), A)


@settings(max_examples=300)
@given(st.lists(st.floats(0, 100), min_size=3, max_size=3),
       st.lists(st.integers(-5, 5), min_size=3, max_size=3).filter(any))
def test_misalignment_nonnegative(h, a):
    assert misalignment(h, a) >= 0


def test_misalignment_nonnegative_bulk():
    rng = np.random.default_rng(1)
    h = rng.exponential(size=(10_000, 3))
    a = rng.integers(-3, 4, size=3)
    a[0] = 1
    assert np.all(misalignment(h, a) >= 0)


# -- rate expressions -------------------------------------------------------------

def test_asymmetric_rate_zero_power():
    assert asymmetric_rate_unclamped((1, 1), A, (0, 0)) == pytest.approx(-0.5)


def test_asymmetric_rate_collinear():
    assert asymmetric_rate_unclamped((1, 1), A, (1.5, 1.5)) == pytest.approx(0.5)


def test_asymmetric_rate_remark_column_matches_model_evaluation(rmk):
    p = REMARK_P1[:, 1]
    r = asymmetric_rate_unclamped((0.5, 1), A, p)
    assert r > 0
    from cfpower.rates import state_rates
    assert state_rates(rmk, A, REMARK_P1)[1] == pytest.approx(r, abs=1e-15)


def test_asymmetric_rate_rejects_negative_power():
    with pytest.raises(ArgumentError):
        asymmetric_rate_unclamped((1, 1), A, (-1, 1))


def test_symmetric_rate_examples():
    assert symmetric_rate_unclamped((1, 1), A, 0) == pytest.approx(-0.5)
    assert symmetric_rate_unclamped((1, 0.5), A, 2) == pytest.approx(0.5 * math.log2(3.5 / 2.5))
    assert symmetric_rate_unclamped((1, 0.5), A, 2) == pytest.approx(0.2427, abs=5e-4)


def test_symmetric_rate_asymptote_at_large_power():
    h = (3, 2)
    limit = 0.5 * math.log2(13 / misalignment(h, A))
    assert symmetric_rate_unclamped(h, A, 1e6) == pytest.approx(limit, abs=1e-3)


def test_symmetric_rate_rejects_negative_power():
    with pytest.raises(ArgumentError):
        symmetric_rate_unclamped((1, 1), A, -0.1)


@settings(max_examples=200)
@given(gains2, coef, st.floats(0, 50))
def test_symmetric_equals_asymmetric_with_equal_powers(h, a, P):
    sym = symmetric_rate_unclamped(h, a, P)
    asym = asymmetric_rate_unclamped(h, a, (P, P))
    assert sym == pytest.approx(asym, abs=1e-12)


def _good_state(h, a):
    return float(np.dot(h, h)) > misalignment(h, a)


@settings(max_examples=200)
@given(gains2, coef)
def test_rate_increasing_and_concave_on_good_states(h, a):
    if not _good_state(h, a):
        return
    grid = np.concatenate([[0.0], np.logspace(-3, 3, 60)])
    r = symmetric_rate_unclamped(h, a, grid)
    assert np.all(np.diff(r) > 0)
    step = 1e-2
    for P in (0.0, 0.1, 1.0, 10.0):
        second = (symmetric_rate_unclamped(h, a, P + 2 * step) - 2 * symmetric_rate_unclamped(h, a, P + step)
                  + symmetric_rate_unclamped(h, a, P))
        assert second < 0


@settings(max_examples=200)
@given(gains2, coef)
def test_bad_states_never_have_positive_rate(h, a):
    if _good_state(h, a):
        return
    grid = np.concatenate([[0.0], np.logspace(-4, 6, 80)])
    assert np.all(clamped(symmetric_rate_unclamped(h, a, grid)) == 0)


@settings(max_examples=200)
@given(st.tuples(st.floats(0.1, 10.0), st.floats(0.1, 10.0)), coef)
def test_asymptote_for_misaligned_good_states(h, a):
    eps = misalignment(h, a)
    n = float(np.dot(h, h))
    # the gap to the limit is about ||a||^2 / (2 ln2 P eps); keep P eps >> ||a||^2
    if not (_good_state(h, a) and eps >= 1e-2):
        return
    assert symmetric_rate_unclamped(h, a, 1e8) == pytest.approx(0.5 * math.log2(n / eps), abs=1e-4)


@settings(max_examples=100)
@given(gains2, coef, st.floats(0.0, 20.0))
def test_slope_matches_central_difference(h, a, P):
    d = 1e-6
    lo = max(P - d, 0.0)
    fd = (symmetric_rate_unclamped(h, a, P + d) - symmetric_rate_unclamped(h, a, lo)) / (P + d - lo)
    assert symmetric_rate_slope(h, a, P) == pytest.approx(fd, rel=1e-4, abs=1e-8)


@pytest.mark.parametrize("x,expected", [(-0.5, 0.0), (0.0, 0.0), (0.4102, 0.4102)])
def test_clamped(x, expected):
    assert clamped(x) == expected


# -- classification and ordering -----------------------------------------------------

def test_example1_all_states_good(ex1):
    good, bad = classify_states(ex1, A)
    assert good == (0, 1, 2, 3) and bad == ()


def test_collinear_small_state_is_good():
    model = DiscreteChannelModel([[0.1, 0.1]], [1.0])
    assert classify_states(model, A) == ((0,), ())


def test_scaled_coefficients_classification():
    model = DiscreteChannelModel([[1, 1], [1, 0]], [0.5, 0.5])
    assert classify_states(model, (2, 2)) == ((0,), (1,))


def test_classification_tie_goes_to_bad():
    # ||h||^2 = misalignment exactly: h = (1, 0), a = (1, 1) gives 1 and 1
    model = DiscreteChannelModel([[1, 0]], [1.0])
    assert classify_states(model, A) == ((), (0,))


@pytest.mark.parametrize("h,o1,o2", [((1, 0.5), 1.0, 5.0), ((1, 1), 2.0, math.inf), ((3, 2), 12.0, 13.0)])
def test_order_criterion_examples(h, o1, o2):
    assert order_criterion(h, A, 1) == pytest.approx(o1)
    assert order_criterion(h, A, 2) == pytest.approx(o2)


def test_order_criterion_rejects_unknown_method():
    with pytest.raises(ArgumentError):
        order_criterion((1, 1), A, 3)


# -- model and reports ------------------------------------------------------------

def test_joint_probabilities_are_products(ex1):
    np.testing.assert_allclose(ex1.probs, [0.48, 0.12, 0.32, 0.08])
    np.testing.assert_array_equal(ex1.gains, [[1, 0.5], [1, 2], [3, 0.5], [3, 2]])
    assert ex1.M == 4 and ex1.L == 2


def test_marginals_must_sum_to_one():
    with pytest.raises(ArgumentError):
        DiscreteChannelModel.from_marginals([[1, 2], [1, 2]], [[0.5, 0.4], [0.5, 0.5]])


def test_rounded_marginals_are_renormalised(ex3):
    assert ex3.M == 100
    assert ex3.probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_zero_gain_state_rejected():
    with pytest.raises(ArgumentError):
        DiscreteChannelModel([[0, 0], [1, 1]], [0.5, 0.5])


def test_coefficients_validation():
    with pytest.raises(ArgumentError):
        as_coefficients((0, 0))
    with pytest.raises(ArgumentError):
        as_coefficients((1,))
    with pytest.raises(ArgumentError):
        as_coefficients((1.5, 1))


def test_expected_rate_zero_policy(ex1):
    assert expected_rate(ex1, A, np.zeros(4)) == 0
    assert expected_rate(ex1, A, np.zeros((2, 4))) == 0


@pytest.mark.parametrize("P", [REMARK_P1, REMARK_P2])
def test_expected_rate_remark_matrices(rmk, P):
    assert expected_rate(rmk, A, P) == pytest.approx(0.4102, abs=5e-4)


def test_expected_rate_dimension_mismatch(ex1):
    with pytest.raises(ArgumentError):
        expected_rate(ex1, A, np.zeros(3))


def test_report_is_self_consistent(rmk):
    report = make_report(rmk, A, REMARK_P1, "X")
    assert report.active_set == (1, 3)
    assert report.bitmask() == "0101"
    assert report.kind == "asymmetric"
    assert report.expected_rate == pytest.approx(expected_rate(rmk, A, REMARK_P1), abs=1e-9)
