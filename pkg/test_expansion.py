"""
Тесты разложений T_α, подходящих дробей и оценки сходимости
"""

from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from services.errors import DomainError, ParameterError
from services.expansion import (
    MobiusMatrix,
    Params,
    convergence_constant,
    convergents,
    digit_of,
    error_bound,
    error_bounds,
    evaluate,
    expand,
    is_admissible,
    orbit,
    reconstruct,
    t_alpha,
)
from storage.models import Digit, TERMINAL_DIGIT


def test_params_bounds():
    params = Params.from_tokens(4, "1/2")
    assert params.left == -params.lam / 2
    assert params.right == params.lam / 2
    with pytest.raises(ParameterError):
        Params.from_tokens(4, "0.4")
    with pytest.raises(ParameterError):
        Params.from_tokens(4, "0.75")
    with pytest.raises(ParameterError):
        Params.from_tokens(4, "1/2", precision=32)


def test_rcf_digits():
    params = Params.from_tokens(3, "1")
    assert expand(Fraction(1, 2), 8, params).digits == (Digit(1, 2),)
    e = expand(Fraction(3, 7), 8, params)
    assert e.digits == (Digit(1, 2), Digit(1, 3))
    assert e.terminated


def test_left_endpoint_terminates():
    params = Params.from_tokens(4, "1/2")
    e = expand(params.left, 5, params)
    assert e.digits == (Digit(-1, 1),)
    assert e.terminated


def test_zero_digit():
    params = Params.from_tokens(5, "0.56")
    assert digit_of(0, params) == TERMINAL_DIGIT
    assert t_alpha(0, params) == 0


def test_outside_interval():
    params = Params.from_tokens(4, "1/2")
    with pytest.raises(DomainError):
        expand(Fraction(9, 10), 5, params)
    with pytest.raises(DomainError):
        digit_of(mpmath.mpf("0.9"), params)


def test_cylinder_boundary_digit():
    params = Params.from_tokens(6, "0.53")
    delta = params.delta(2)
    # δ_d - правый конец цилиндра d+1, его образ - ℓ_0
    assert digit_of(delta, params) == Digit(1, 3)
    assert digit_of(-delta, params) == Digit(-1, 3)
    assert t_alpha(delta, params) == params.left


@pytest.mark.parametrize("q, alpha", [(4, "1/2"), (5, "0.56"), (6, "0.53"), (7, "rho/lambda"), (8, "1/lambda")])
def test_convergents_match_evaluation(q, alpha):
    params = Params.from_tokens(q, alpha)
    x = params.field("1/3") * params.lam / 2
    path = orbit(x, 6, params)
    pairs = convergents(path.digits, params)
    for k in range(1, len(path.digits) + 1):
        assert pairs[k].R / pairs[k].S == evaluate(path.digits[:k], params)
        matrix = MobiusMatrix.product(path.digits[:k], params.lam)
        assert (matrix.b, matrix.d) == (pairs[k].R, pairs[k].S)
        sign = 1
        for digit in path.digits[:k]:
            sign *= -digit.epsilon
        assert pairs[k - 1].R * pairs[k].S - pairs[k].R * pairs[k - 1].S == sign
        assert matrix.det() == sign
        assert reconstruct(pairs[k], pairs[k - 1], path.points[k]) == x


def test_first_convergent():
    params = Params.from_tokens(4, "1/2")
    pairs = convergents([Digit(-1, 1)], params)
    assert pairs[0].R == 0 and pairs[0].S == 1
    assert pairs[1].R / pairs[1].S == params.left


def test_convergence_constant():
    params = Params.from_tokens(4, "1/2")
    lam = params.lam
    assert convergence_constant(params) == (lam / 2) / (1 + lam / 2 - lam)


@pytest.mark.parametrize("q, alpha", [(4, "1/2"), (4, "1/lambda"), (5, "0.5038"), (5, "0.56"), (6, "0.53"), (7, "rho/lambda")])
def test_error_bound_holds(q, alpha):
    params = Params.from_tokens(q, alpha)
    rng = np.random.default_rng(7)
    left, right = float(params.left), float(params.right)
    for x in rng.uniform(left, right, 25):
        for n in (1, 5, 20, 60):
            result = error_bound(mpmath.mpf(float(x)), n, params)
            assert result.actual <= result.bound
            assert abs(result.residual) < mpmath.mpf(2) ** -60


def test_evaluate_rejects_inner_terminal():
    params = Params.from_tokens(4, "1/2")
    with pytest.raises(ParameterError):
        evaluate([TERMINAL_DIGIT, Digit(1, 2)], params)


def test_admissibility_runs():
    params = Params.from_tokens(6, "0.53")
    minus = Digit(-1, 1)
    assert is_admissible([Digit(1, 2), minus, minus, Digit(1, 3)], params)
    assert not is_admissible([minus, minus, minus, Digit(1, 3)], params)
    odd = Params.from_tokens(5, "0.56")
    assert is_admissible([minus] * 5, odd)


@hypothesis_settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-0.7, max_value=0.7, allow_nan=False), st.integers(min_value=1, max_value=30))
def test_expansions_are_admissible(x, n):
    params = Params.from_tokens(4, "0.6")
    if not float(params.left) < x < float(params.right):
        return
    e = expand(mpmath.mpf(x), n, params)
    assert is_admissible(e.digits, params)


def test_error_bounds_every_step():
    params = Params.from_tokens(5, "0.56")
    x = mpmath.mpf("0.3")
    steps = error_bounds(x, 30, params)
    assert len(steps) == 31
    for n in (1, 7, 30):
        single = error_bound(x, n, params)
        assert abs(steps[n].actual - single.actual) <= mpmath.mpf(2) ** -100 * single.bound
        assert abs(steps[n].bound - single.bound) <= mpmath.mpf(2) ** -100 * single.bound


@pytest.mark.slow
@pytest.mark.parametrize("q, alpha", [(4, "1/2"), (4, "1/lambda"), (5, "0.5038"), (5, "0.56"), (6, "0.53"), (7, "rho/lambda")])
def test_error_bound_thousand_points(q, alpha):
    params = Params.from_tokens(q, alpha)
    rng = np.random.default_rng(2024)
    for x in rng.uniform(float(params.left), float(params.right), 1000):
        for step in error_bounds(mpmath.mpf(float(x)), 60, params)[1:]:
            assert step.actual <= step.bound
            assert abs(step.residual) < mpmath.mpf(2) ** -60
