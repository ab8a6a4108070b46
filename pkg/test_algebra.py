"""
Тесты точной арифметики в Q(λ_q)
"""

from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from services.algebra import (
    b_identity_defects,
    b_n,
    compare,
    delta_d,
    lambda_,
    number_field,
    parse_token,
    rho,
)
from services.errors import ParameterError
from storage.models import GroupIndex, Ordering, Parity


def test_group_index():
    assert GroupIndex(6).parity is Parity.EVEN
    assert GroupIndex(6).p == 3
    assert GroupIndex(7).h == 2
    assert GroupIndex(3).h == 0
    with pytest.raises(ParameterError):
        GroupIndex(2)
    with pytest.raises(ParameterError):
        GroupIndex(5).p


@pytest.mark.parametrize("q, value", [(3, 1.0), (4, 1.4142135623730951), (6, 1.7320508075688772)])
def test_lambda_values(q, value):
    assert float(lambda_(q)) == pytest.approx(value, abs=1e-15)


def test_lambda_bad_q():
    with pytest.raises(ParameterError):
        lambda_(2)


def test_lambda_high_precision():
    with mpmath.mp.workprec(200):
        expected = 2 * mpmath.cos(mpmath.pi / 7)
        assert abs(lambda_(7).to_mpf(200) - expected) < mpmath.mpf(2) ** -190


def test_b_n_examples():
    assert b_n(4, 0) == 0
    assert b_n(4, 2) == lambda_(4)
    assert b_n(4, 3) == 1
    assert b_n(4, -1) == -1


@pytest.mark.parametrize("q", [3, 4, 5, 6, 7, 8, 9, 10, 11, 12])
def test_b_n_periodic_and_trigonometric(q):
    for n in range(2 * q + 1):
        assert b_n(q, n + 2 * q) == b_n(q, n)
        with mpmath.mp.workprec(128):
            expected = mpmath.sin(n * mpmath.pi / q) / mpmath.sin(mpmath.pi / q)
            assert abs(b_n(q, n).to_mpf(128) - expected) < mpmath.mpf(10) ** -30


@pytest.mark.parametrize("q", [3, 4, 5, 6, 7, 8])
def test_b_identity(q):
    assert b_identity_defects(q) == []


@pytest.mark.slow
@pytest.mark.parametrize("q", [9, 10, 11, 12])
def test_b_identity_large_q(q):
    assert b_identity_defects(q) == []


@pytest.mark.parametrize("q", [3, 5, 7, 9, 11])
def test_rho_defining_equation(q):
    r = rho(q)
    lam = lambda_(q)
    assert r * r + (2 - lam) * r - 1 == 0
    assert compare(r / lam, Fraction(1, 2)) is Ordering.GT
    assert compare(r / lam, 1 / lam) is Ordering.LT


def test_rho_values():
    assert float(rho(3)) == pytest.approx((5 ** 0.5 - 1) / 2, abs=1e-15)
    assert float(rho(5)) == pytest.approx(0.827090, abs=1e-6)
    with pytest.raises(ParameterError):
        rho(4)


@pytest.mark.parametrize("q", [3, 5, 7, 9, 11])
def test_odd_b_square_identity(q):
    h = GroupIndex(q).h
    assert (2 - lambda_(q)) * b_n(q, h + 1) ** 2 == 1


def test_delta_d():
    alpha = number_field(4)(Fraction(1, 2))
    assert delta_d(4, alpha, 1) == lambda_(4) / 3
    assert delta_d(3, number_field(3)(1), 1) == Fraction(1, 2)
    alpha5 = number_field(5)("0.56")
    assert delta_d(5, alpha5, 1) > delta_d(5, alpha5, 2) > delta_d(5, alpha5, 3)
    with pytest.raises(ParameterError):
        delta_d(4, alpha, 0)


def test_compare_examples():
    lam = lambda_(4)
    assert compare(lam, lam) is Ordering.EQ
    assert compare(b_n(4, 2), 1) is Ordering.GT
    assert compare(delta_d(4, number_field(4)(Fraction(1, 2)), 1), Fraction(1, 2)) is Ordering.LT


def test_compare_near_equal():
    # разность порядка 10^-40: знак определяется уточнением интервала
    lam = lambda_(6)
    close = Fraction(17320508075688772935274463415058723669, 10**37)
    assert compare(lam, close) is Ordering.GT


def test_parse_token():
    field = number_field(4)
    assert parse_token("1/lambda", 4) == 1 / field.lambda_
    assert parse_token("53/100", 4) == Fraction(53, 100)
    assert parse_token("-0.3", 4) == Fraction(-3, 10)
    assert parse_token("rho/lambda", 5) == rho(5) / lambda_(5)
    with pytest.raises(ParameterError):
        parse_token("rho/lambda", 4)
    with pytest.raises(ParameterError):
        parse_token("foo", 4)


def test_mixed_fields_rejected():
    with pytest.raises(ParameterError):
        lambda_(4) + lambda_(6)


@hypothesis_settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=-50, max_value=50),
    st.integers(min_value=-50, max_value=50),
    st.integers(min_value=1, max_value=30),
    st.sampled_from([4, 5, 6, 7, 8]),
)
def test_compare_matches_floats(a, b, c, q):
    field = number_field(q)
    x = field(a) + field(Fraction(b, c)) * field.lambda_
    y = field(Fraction(a, c)) * field.lambda_ * field.lambda_
    expected = mpmath.sign(x.to_mpf(200) - y.to_mpf(200))
    ordering = compare(x, y)
    assert {Ordering.LT: -1, Ordering.EQ: 0, Ordering.GT: 1}[ordering] == expected


@hypothesis_settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=40), st.integers(min_value=1, max_value=40), st.sampled_from([4, 5, 6, 9]))
def test_field_inverse(a, b, q):
    field = number_field(q)
    x = field(a) + field(b) * field.lambda_
    assert x * x.inverse() == 1
