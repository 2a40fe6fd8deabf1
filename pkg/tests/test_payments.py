import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gabench.domain import DmuRecord, PaymentSchedule
from gabench.payments import (
    PaymentRegion,
    RegionMismatchError,
    achievement,
    linearized_payment,
    payment,
    payment_for_levels,
    region_contains,
    region_of,
    total_payment,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
positive = st.floats(1e-3, 1e3, allow_nan=False)
ceil_pos = st.floats(1e-3, 1e3, allow_nan=False)
weight = st.floats(1e-3, 1.0)


def test_eighty_percent_achievement():
    assert achievement(0.2 * 5, 5) == pytest.approx(0.8)


@pytest.mark.parametrize("ceiling", [0.0, 0.5, 3.0])
def test_achievement_boundaries(ceiling):
    assert achievement(0.0, ceiling) == 1.0
    if ceiling > 0:
        assert achievement(ceiling, ceiling) == 0.0


def test_zero_ceiling_is_a_step():
    assert achievement(-1.0, 0.0) == 1.0
    assert achievement(0.0, 0.0) == 1.0
    assert achievement(1e-12, 0.0) == 0.0


def test_negative_ceiling_rejected():
    with pytest.raises(ValueError):
        achievement(0.5, -1.0)


def test_dmu_d_goal_payments():
    assert round(payment(1, 20, 0.5, 3), 2) == 6.67
    assert payment(3, 20, 0.5, 4) == pytest.approx(2.5)
    assert payment(-5, 10, 0.5, 2) == 5.0


def test_total_payment_examples():
    sched = PaymentSchedule((0.5, 0.5))
    e = DmuRecord("E", "E", (5, 2), (6, 3), 25)
    bd = total_payment((1, 1), e, sched)
    assert bd.per_indicator == pytest.approx((10.0, 6.25))
    assert bd.total == pytest.approx(16.25)
    d = DmuRecord("D", "D", (3, 4), (4, 7), 20)
    bd = payment_for_levels((4, 5.8), d, sched)
    assert [round(p, 2) for p in bd.per_indicator] == [6.67, 5.5]
    assert round(bd.total, 2) == 12.17
    assert total_payment((-1, 0), d, sched).total == 20.0
    assert bd.rates(20, (0.5, 0.5)) == pytest.approx((2 / 3, 0.55))


def test_total_payment_length_mismatch():
    with pytest.raises(ValueError):
        total_payment((1.0,), DmuRecord("D", "D", (3, 4), (4, 7), 20), PaymentSchedule((0.5, 0.5)))


def test_linearized_examples():
    assert round(linearized_payment(PaymentRegion.LINEAR_PAY, 1, 20, 0.5, 3), 2) == 6.67
    assert linearized_payment(PaymentRegion.FULL_PAY, -2, 10, 0.5, 5) == 5.0
    assert linearized_payment(PaymentRegion.ZERO_PAY, 7, 10, 0.5, 5) == 0.0


@pytest.mark.parametrize(
    "region, s, d",
    [
        (PaymentRegion.FULL_PAY, 0.5, 5),
        (PaymentRegion.LINEAR_PAY, -0.5, 5),
        (PaymentRegion.LINEAR_PAY, 6, 5),
        (PaymentRegion.ZERO_PAY, 4, 5),
        (PaymentRegion.LINEAR_PAY, 0, 0),
        (PaymentRegion.ZERO_PAY, 0, 0),
    ],
)
def test_linearized_rejects_inconsistent_region(region, s, d):
    with pytest.raises(RegionMismatchError):
        linearized_payment(region, s, 10, 0.5, d)


def test_region_of():
    assert region_of(-1, 2) is PaymentRegion.FULL_PAY
    assert region_of(0, 2) is PaymentRegion.FULL_PAY
    assert region_of(1, 2) is PaymentRegion.LINEAR_PAY
    assert region_of(2, 2) is PaymentRegion.ZERO_PAY
    assert region_of(1, 0) is PaymentRegion.ZERO_PAY
    assert region_contains(PaymentRegion.ZERO_PAY, 1e-9, 0.0)


@settings(max_examples=300, deadline=None)
@given(finite, positive, weight, ceil_pos)
def test_payment_bounded(s, q, w, d):
    p = payment(s, q, w, d)
    assert 0.0 <= p <= q * w * (1 + 1e-15)


@settings(max_examples=300, deadline=None)
@given(finite, finite, positive, weight, st.floats(0.0, 1e3))
def test_payment_non_increasing(s1, s2, q, w, d):
    lo, hi = min(s1, s2), max(s1, s2)
    assert payment(lo, q, w, d) >= payment(hi, q, w, d)


@settings(max_examples=200, deadline=None)
@given(finite, positive, weight, ceil_pos)
def test_payment_continuous(s, q, w, d):
    eps = 1e-9
    assert abs(payment(s + eps, q, w, d) - payment(s, q, w, d)) <= q * w * eps / d + 1e-12


@settings(max_examples=300, deadline=None)
@given(finite, positive, weight, ceil_pos)
def test_linearization_matches(s, q, w, d):
    lin = linearized_payment(region_of(s, d), s, q, w, d)
    assert abs(lin - payment(s, q, w, d)) <= 1e-12 * max(1.0, q * w)


@settings(max_examples=200, deadline=None)
@given(positive, weight, ceil_pos)
def test_boundary_agreement(q, w, d):
    full = linearized_payment(PaymentRegion.FULL_PAY, 0.0, q, w, d)
    assert full == pytest.approx(linearized_payment(PaymentRegion.LINEAR_PAY, 0.0, q, w, d), abs=1e-12)
    zero = linearized_payment(PaymentRegion.ZERO_PAY, d, q, w, d)
    assert zero == pytest.approx(linearized_payment(PaymentRegion.LINEAR_PAY, d, q, w, d), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(finite, positive, weight, ceil_pos, st.floats(1e-3, 1e3))
def test_scale_covariance(s, q, w, d, c):
    assert math.isclose(payment(s, c * q, w, d), c * payment(s, q, w, d), rel_tol=1e-12, abs_tol=1e-12)
