from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, List, NamedTuple, Sequence, Tuple, Union

import mpmath
from loguru import logger
from mpmath import mp

from services.algebra import (
    AlgebraicNumber,
    check_alpha,
    compare,
    delta_d,
    group_index,
    lambda_,
    number_field,
    parse_token,
)
from services.errors import BoundaryAmbiguityWarning, DomainError, ParameterError, SingularInputError
from storage.models import TERMINAL_DIGIT, ConvergentPair, Digit, Expansion, GroupIndex, Ordering

Number = Union[AlgebraicNumber, mpmath.mpf]

# запас бит на итерацию при вычислении орбиты с плавающей точкой
_BITS_PER_STEP = 4
_GUARD_BITS = 64

SEED_PREV = ConvergentPair(-1, 1, 0)
SEED = ConvergentPair(0, 0, 1)


@dataclass(frozen=True)
class Params:
    q: GroupIndex
    alpha: AlgebraicNumber
    precision: int = 128

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", group_index(self.q))
        if not isinstance(self.alpha, AlgebraicNumber):
            object.__setattr__(self, "alpha", number_field(self.q)(self.alpha))
        if self.precision < 64:
            raise ParameterError(f"точность должна быть ≥ 64 бит: {self.precision}")
        check_alpha(self.q, self.alpha)
        if compare(self.left, 0) is Ordering.GT or compare(self.right, 0) is not Ordering.GT:
            raise ParameterError("нарушено ℓ_0 ≤ 0 < r_0")
        if self.left == 0 and not (self.q.q == 3 and self.alpha == 1):
            raise ParameterError("ℓ_0 = 0 допустимо только для q=3, α=1")
        if self.q.q >= 4 and not self.r0_exceeds_delta1:
            raise ParameterError("нарушено r_0 > δ_1")

    @classmethod
    def from_tokens(cls, q: Union[int, GroupIndex], alpha: str, precision: int = 128) -> "Params":
        group = group_index(q)
        return cls(group, parse_token(alpha, group), precision)

    @cached_property
    def lam(self) -> AlgebraicNumber:
        return lambda_(self.q)

    @cached_property
    def left(self) -> AlgebraicNumber:
        """ℓ_0 = (α−1)λ"""
        return (self.alpha - 1) * self.lam

    @cached_property
    def right(self) -> AlgebraicNumber:
        """r_0 = αλ"""
        return self.alpha * self.lam

    @cached_property
    def r0_exceeds_delta1(self) -> bool:
        # для q = 3 и α ≤ (√5−1)/2 неравенство не выполняется: цилиндр Δ(+1:1) пуст
        return compare(self.right, delta_d(self.q, self.alpha, 1)) is Ordering.GT

    def field(self, value: Union[int, Fraction, str, AlgebraicNumber]) -> AlgebraicNumber:
        return number_field(self.q)(value)

    def delta(self, d: int) -> AlgebraicNumber:
        return delta_d(self.q, self.alpha, d)

    def floats(self, prec: int) -> Tuple[mpmath.mpf, mpmath.mpf, mpmath.mpf, mpmath.mpf]:
        """(λ, α, ℓ_0, r_0) с точностью prec бит"""
        return (
            self.lam.to_mpf(prec),
            self.alpha.to_mpf(prec),
            self.left.to_mpf(prec),
            self.right.to_mpf(prec),
        )


def _is_exact(x: Any) -> bool:
    return isinstance(x, (AlgebraicNumber, int, Fraction))


def _as_exact(x: Any, params: Params) -> AlgebraicNumber:
    return x if isinstance(x, AlgebraicNumber) else params.field(x)


def _check_exact_domain(x: AlgebraicNumber, params: Params) -> None:
    if compare(x, params.left) is Ordering.LT or compare(x, params.right) is Ordering.GT:
        raise DomainError(f"x = {x} вне [ℓ_0, r_0] = [{params.left}, {params.right}]")


def _float_digit(x: mpmath.mpf, lam: mpmath.mpf, alpha: mpmath.mpf, precision: int) -> Digit:
    """Цифра в режиме с плавающей точкой; вызывать внутри mp.workprec"""
    if abs(x) < mpmath.ldexp(1, -(precision // 2)):
        return TERMINAL_DIGIT
    value = 1 / (abs(x) * lam) + 1 - alpha
    d = int(mp.floor(value))
    gap = min(value - d, d + 1 - value)
    if gap < mpmath.ldexp(value, 16 - precision):
        message = f"x = {mpmath.nstr(x, 20)} на границе цилиндра δ_{max(d, 1)} при точности {precision} бит"
        logger.warning(message)
        warnings.warn(message, BoundaryAmbiguityWarning, stacklevel=3)
    return Digit(1 if x > 0 else -1, max(d, 1))


def digit_of(x: Number, params: Params) -> Digit:
    """(ε(x), d(x)) с d(x) = ⌊|1/(xλ)| + 1 − α⌋; для x = 0 - (0:∞)"""
    if _is_exact(x):
        x = _as_exact(x, params)
        _check_exact_domain(x, params)
        sign = x.sign()
        if sign == 0:
            return TERMINAL_DIGIT
        d = (1 / (abs(x) * params.lam) + 1 - params.alpha).floor()
        return Digit(sign, d)
    with mp.workprec(params.precision + _GUARD_BITS):
        lam, alpha, left, right = params.floats(params.precision + _GUARD_BITS)
        x = mp.mpf(x)
        if x < left or x > right:
            raise DomainError(f"x = {mpmath.nstr(x, 20)} вне [ℓ_0, r_0]")
        return _float_digit(x, lam, alpha, params.precision)


def t_alpha(x: Number, params: Params) -> Number:
    """T_α(x) = ε/x − dλ на цилиндре Δ(ε:d), T_α(0) = 0"""
    digit = digit_of(x, params)
    if _is_exact(x):
        x = _as_exact(x, params)
        if digit.is_terminal:
            return params.field(0)
        return digit.epsilon / x - digit.d * params.lam
    with mp.workprec(params.precision + _GUARD_BITS):
        if digit.is_terminal:
            return mp.mpf(0)
        lam = params.lam.to_mpf(params.precision + _GUARD_BITS)
        return digit.epsilon / mp.mpf(x) - digit.d * lam


@dataclass
class Orbit:
    digits: List[Digit]
    points: List[Number]
    terminated: bool
    approximate_zero: bool = False


def _exact_orbit(x: AlgebraicNumber, n_max: int, params: Params) -> Orbit:
    _check_exact_domain(x, params)
    digits: List[Digit] = []
    points: List[Number] = [x]
    lam, alpha = params.lam, params.alpha
    while len(digits) < n_max and x:
        d = (1 / (abs(x) * lam) + 1 - alpha).floor()
        digit = Digit(x.sign(), d)
        x = digit.epsilon / x - d * lam
        digits.append(digit)
        points.append(x)
    return Orbit(digits, points, terminated=not x)


def _float_orbit_at(x: mpmath.mpf, n_max: int, params: Params, work: int) -> Tuple[Orbit, int]:
    """Орбита при рабочей точности work; возвращает также log2 max S_n²"""
    with mp.workprec(work):
        lam, alpha, left, right = params.floats(work)
        if x < left or x > right:
            raise DomainError(f"x = {mpmath.nstr(x, 20)} вне [ℓ_0, r_0]")
        digits: List[Digit] = []
        points: List[Number] = [x]
        s_prev, s_cur = mp.mpf(0), mp.mpf(1)
        growth = 0
        approximate = False
        exact_zero = x == 0
        while len(digits) < n_max and not exact_zero:
            digit = _float_digit(x, lam, alpha, params.precision)
            if digit.is_terminal:
                approximate = True
                break
            x = digit.epsilon / x - digit.d * lam
            s_prev, s_cur = s_cur, digit.d * lam * s_cur + digit.epsilon * s_prev
            growth = max(growth, int(2 * mpmath.log(s_cur, 2)) + 1)
            digits.append(digit)
            points.append(x)
            exact_zero = x == 0
        return Orbit(digits, points, terminated=exact_zero or approximate, approximate_zero=approximate), growth


def _float_orbit(x: Any, n_max: int, params: Params) -> Orbit:
    with mp.workprec(params.precision):
        x = mp.mpf(x)
    extra = _BITS_PER_STEP * n_max + _GUARD_BITS
    while True:
        work = params.precision + extra
        orbit, growth = _float_orbit_at(x, n_max, params, work)
        # ошибка T^n(x) порядка 2^(-work)·S_n²
        if growth < extra:
            break
        logger.debug(f"S_n² ~ 2^{growth}: повтор орбиты с {params.precision + 2 * extra} битами")
        extra *= 2
    with mp.workprec(params.precision):
        orbit.points = [+p for p in orbit.points]
    return orbit


def orbit(x: Number, n_max: int, params: Params) -> Orbit:
    """Цифры и точки T_α^k(x), k = 0..n"""
    if _is_exact(x):
        return _exact_orbit(_as_exact(x, params), n_max, params)
    return _float_orbit(x, n_max, params)


def expand(x: Number, n_max: int, params: Params) -> Expansion:
    result = orbit(x, n_max, params)
    return Expansion(tuple(result.digits), result.terminated, result.approximate_zero)


def _digits_of(e: Union[Expansion, Sequence[Digit]]) -> Sequence[Digit]:
    return e.digits if isinstance(e, Expansion) else e


def _lambda_for(params: Params, exact: bool) -> Any:
    return params.lam if exact else params.lam.to_mpf(params.precision + _GUARD_BITS)


def convergents(e: Union[Expansion, Sequence[Digit]], params: Params, exact: bool = True) -> List[ConvergentPair]:
    """(R_n, S_n) по рекуррентам, начиная с (R_0, S_0) = (0, 1)"""
    lam = _lambda_for(params, exact)
    r_prev, r_cur = SEED_PREV.R, SEED.R
    s_prev, s_cur = SEED_PREV.S, SEED.S
    pairs = [SEED]
    ctx = mp.workprec(params.precision + _GUARD_BITS)
    with ctx:
        for n, digit in enumerate(_digits_of(e), start=1):
            if digit.is_terminal:
                break
            r_prev, r_cur = r_cur, digit.d * lam * r_cur + digit.epsilon * r_prev
            s_prev, s_cur = s_cur, digit.d * lam * s_cur + digit.epsilon * s_prev
            pairs.append(ConvergentPair(n, r_cur, s_cur))
    return pairs


class MobiusMatrix:
    """Матрица [[a, b], [c, d]], действующая как x ↦ (ax + b)/(cx + d)"""

    def __init__(self, a: Any, b: Any, c: Any, d: Any) -> None:
        self.a, self.b, self.c, self.d = a, b, c, d

    @classmethod
    def identity(cls) -> "MobiusMatrix":
        return cls(1, 0, 0, 1)

    @classmethod
    def from_digit(cls, digit: Digit, lam: Any) -> "MobiusMatrix":
        """A_i = [[0, ε_i], [1, d_iλ]]"""
        return cls(0, digit.epsilon, 1, digit.d * lam)

    @classmethod
    def product(cls, digits: Sequence[Digit], lam: Any) -> "MobiusMatrix":
        """M_n = A_1⋯A_n = [[R_{n−1}, R_n], [S_{n−1}, S_n]]"""
        matrix = cls.identity()
        for digit in digits:
            if digit.is_terminal:
                break
            matrix = matrix.compose(cls.from_digit(digit, lam))
        return matrix

    def compose(self, other: "MobiusMatrix") -> "MobiusMatrix":
        return MobiusMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    __matmul__ = compose

    def det(self) -> Any:
        return self.a * self.d - self.b * self.c

    def inverse(self) -> "MobiusMatrix":
        det = self.det()
        return MobiusMatrix(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def __call__(self, x: Any) -> Any:
        denominator = self.c * x + self.d
        if denominator == 0:
            raise SingularInputError(f"нулевой знаменатель в {self!r}({x})")
        return (self.a * x + self.b) / denominator

    def __repr__(self) -> str:
        return f"MobiusMatrix({self.a}, {self.b}, {self.c}, {self.d})"


def evaluate(digits: Union[Expansion, Sequence[Digit]], params: Params, exact: bool = True) -> Number:
    """Значение конечной цепной дроби [ε_1:d_1, …, ε_n:d_n]"""
    lam = _lambda_for(params, exact)
    digits = list(_digits_of(digits))
    if digits and digits[-1].is_terminal:
        digits.pop()
    if any(digit.is_terminal for digit in digits):
        raise ParameterError("цифра (0:∞) допустима только в конце")
    value: Any = params.field(0) if exact else mp.mpf(0)
    with mp.workprec(params.precision + _GUARD_BITS):
        for digit in reversed(digits):
            denominator = digit.d * lam + value
            if denominator == 0:
                raise SingularInputError(f"нулевой знаменатель при вычислении {[str(d) for d in digits]}")
            value = digit.epsilon / denominator
    return value


def reconstruct(pair_n: ConvergentPair, pair_prev: ConvergentPair, tail: Number) -> Number:
    """x = (R_n + tR_{n−1})/(S_n + tS_{n−1}), t = T_α^n(x)"""
    denominator = pair_n.S + tail * pair_prev.S
    if denominator == 0:
        raise SingularInputError(f"S_n + t·S_(n−1) = 0 при n={pair_n.n}")
    return (pair_n.R + tail * pair_prev.R) / denominator


def tail_from(x: Number, pair_n: ConvergentPair, pair_prev: ConvergentPair) -> Number:
    """T_α^n(x) = (R_n − S_n x)/(S_{n−1}x − R_{n−1})"""
    denominator = pair_prev.S * x - pair_prev.R
    if denominator == 0:
        raise SingularInputError(f"S_(n−1)x − R_(n−1) = 0 при n={pair_n.n}")
    return (pair_n.R - pair_n.S * x) / denominator


class ErrorBound(NamedTuple):
    actual: mpmath.mpf
    bound: mpmath.mpf
    # actual·S_n²·(1 + t_n v_n) − |t_n|
    residual: mpmath.mpf


def convergence_constant(params: Params) -> AlgebraicNumber:
    """αλ/(1+αλ−λ)"""
    return params.right / (1 + params.right - params.lam)


def _to_mp(value: Any, prec: int) -> mpmath.mpf:
    if isinstance(value, AlgebraicNumber):
        return value.to_mpf(prec)
    if isinstance(value, Fraction):
        return mp.mpf(value.numerator) / value.denominator
    return mp.mpf(value)


def error_bounds(x: Number, n: int, params: Params) -> List[ErrorBound]:
    """ErrorBound для шагов 0..k одной орбиты, k = min(n, длина разложения)"""
    exact = _is_exact(x)
    path = orbit(x, n, params)
    k = len(path.digits)
    work = params.precision + _GUARD_BITS
    if exact:
        pairs = convergents(path.digits, params)
    else:
        # x − R_n/S_n порядка 1/S_n²: нужно ещё log2 S_n² бит
        rough = convergents(path.digits, params, exact=False)
        with mp.workprec(work):
            growth = int(2 * mpmath.log(abs(rough[k].S), 2)) + 1 if k else 0
        pairs = convergents(path.digits, Params(params.q, params.alpha, params.precision + growth), exact=False)
        work += growth
    results: List[ErrorBound] = []
    with mp.workprec(work):
        constant = convergence_constant(params).to_mpf(work)
        x_mp = None if exact else mp.mpf(path.points[0])
        for m in range(k + 1):
            pair, prev = pairs[m], (pairs[m - 1] if m else SEED_PREV)
            if exact:
                difference = path.points[0] - params.field(pair.R) / params.field(pair.S)
                actual = abs(difference).to_mpf(work)
            else:
                actual = abs(x_mp - mp.mpf(pair.R) / mp.mpf(pair.S))
            s_m = _to_mp(pair.S, work)
            v_m = _to_mp(prev.S, work) / s_m
            t_m = _to_mp(path.points[m], work)
            residual = actual * s_m * s_m * (1 + t_m * v_m) - abs(t_m)
            results.append(ErrorBound(actual, constant / (s_m * s_m), residual))
    return results


def error_bound(x: Number, n: int, params: Params) -> ErrorBound:
    """Фактическая ошибка |x − R_n/S_n|, оценка αλ/((1+αλ−λ)S_n²) и невязка тождества для хвоста"""
    return error_bounds(x, n, params)[-1]


def is_admissible(digits: Sequence[Digit], params: Params) -> bool:
    """Для чётного q серии (−1:1) не длиннее p−1 (p−2 при α = 1/λ)"""
    if not params.q.is_even:
        return True
    longest = params.q.p - 1 if compare(params.right, 1) is Ordering.LT else params.q.p - 2
    minus_one = Digit(-1, 1)
    run = 0
    for digit in digits:
        run = run + 1 if digit == minus_one else 0
        if run > longest:
            return False
    return True
