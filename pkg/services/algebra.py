"""Точная арифметика в поле Q(λ_q), λ_q = 2cos(π/q).

Элементы хранятся как многочлены с рациональными коэффициентами от образующей поля,
приведённые по модулю её минимального многочлена. Для чётного q образующая - λ,
для нечётного - ρ (корень x² + (2−λ)x − 1), поскольку ρ, вообще говоря, не лежит в Q(λ),
а λ = ρ + 2 − 1/ρ лежит в Q(ρ).
"""
from __future__ import annotations

import math
import re
import threading
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Sequence, Tuple, Union

import mpmath
from loguru import logger
from mpmath import iv, mp
from mpmath.libmp import mpf_sign
from sympy import Poly, QQ, Symbol, fraction, resultant, sympify, together
from sympy.core.sympify import SympifyError
from sympy.polys.densearith import dup_add, dup_mul, dup_neg, dup_rem, dup_sub
from sympy.polys.densebasic import dup_degree, dup_strip
from sympy.polys.euclidtools import dup_invert
from sympy.polys.polyerrors import BasePolynomialError, NotInvertible

from services.errors import InternalConsistencyError, ParameterError
from storage.models import GroupIndex, Ordering

_X = Symbol("x")
_Y = Symbol("y")
LAM = Symbol("lam")
RHO = Symbol("rho")

# iv.prec - глобальное состояние контекста mpmath
_IV_LOCK = threading.Lock()
_START_PREC = 64
_MAX_PREC = 1 << 16

_LAMBDA_WORD = re.compile(r"\blambda\b|λ")


def _to_fraction(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if hasattr(value, "p") and hasattr(value, "q"):
        return Fraction(int(value.p), int(value.q))
    return Fraction(int(value.numerator), int(value.denominator))


def _qq(value: Union[int, Fraction]) -> Any:
    value = _to_fraction(value)
    return QQ(value.numerator, value.denominator)


def _mp_value(value: Any) -> mpmath.mpf:
    value = _to_fraction(value)
    return mp.mpf(value.numerator) / value.denominator


def group_index(q: Union[int, GroupIndex]) -> GroupIndex:
    if isinstance(q, GroupIndex):
        return q
    return GroupIndex(q)


def _pick_factor(poly: Poly, root: mpmath.mpf) -> Poly:
    """Выбрать неприводимый множитель, обращающийся в ноль в root"""
    _, factors = poly.factor_list()
    vanishing = []
    with mp.workprec(256):
        for factor, _ in factors:
            coeffs = [_mp_value(c) for c in factor.all_coeffs()]
            if abs(mpmath.polyval(coeffs, root)) < mpmath.mpf(2) ** -120:
                vanishing.append(factor)
    if len(vanishing) != 1:
        raise InternalConsistencyError(f"не удалось выделить минимальный многочлен из {poly}")
    return vanishing[0].monic()


@lru_cache(maxsize=None)
def lambda_minimal_polynomial(q: int) -> Poly:
    """Минимальный многочлен 2cos(π/q): множитель B_q(x), где B_n - рекуррентные многочлены"""
    prev, cur = Poly(0, _X, domain=QQ), Poly(1, _X, domain=QQ)
    x = Poly(_X, _X, domain=QQ)
    for _ in range(q - 1):
        prev, cur = cur, x * cur - prev
    with mp.workprec(256):
        root = 2 * mp.cos(mp.pi / q)
        return _pick_factor(cur, root)


@lru_cache(maxsize=None)
def rho_minimal_polynomial(q: int) -> Poly:
    """Минимальный многочлен ρ: результант x² + (2−y)x − 1 и m_λ(y) по y"""
    m_lambda = lambda_minimal_polynomial(q).as_expr().subs(_X, _Y)
    res = resultant(_X**2 + (2 - _Y) * _X - 1, m_lambda, _Y)
    with mp.workprec(256):
        lam = 2 * mp.cos(mp.pi / q)
        root = (lam - 2 + mp.sqrt(lam * lam - 4 * lam + 8)) / 2
        return _pick_factor(Poly(res, _X, domain=QQ), root)


class NumberField:
    """Поле Q(λ_q) для чётного q и Q(ρ_q) ⊇ Q(λ_q) для нечётного"""

    def __init__(self, group: GroupIndex) -> None:
        self.group = group
        self.q = group.q
        self.generator_name = "lambda" if group.is_even else "rho"
        self.generator_symbol = "λ" if group.is_even else "ρ"
        minimal = lambda_minimal_polynomial(self.q) if group.is_even else rho_minimal_polynomial(self.q)
        self.modulus: List[Any] = [QQ.from_sympy(c) for c in minimal.all_coeffs()]
        self.degree = dup_degree(self.modulus)
        self._enclosures: Dict[int, Any] = {}

        self.zero = AlgebraicNumber(self, [])
        self.one = AlgebraicNumber(self, [QQ(1)])
        self.generator = AlgebraicNumber(self, [QQ(1), QQ(0)])
        if group.is_even:
            self.lambda_ = self.generator
        else:
            self.lambda_ = self.generator + 2 - self.generator.inverse()
        self.b = BSequence(self)
        logger.debug(f"Поле для q={self.q}: образующая {self.generator_name}, степень {self.degree}")

    def reduce(self, coeffs: Sequence[Any]) -> Tuple[Any, ...]:
        f = dup_strip([QQ.convert(c) for c in coeffs])
        if dup_degree(f) >= self.degree:
            f = dup_rem(f, self.modulus, QQ)
        return tuple(f)

    def __call__(self, value: Union[int, Fraction, str, "AlgebraicNumber"]) -> "AlgebraicNumber":
        if isinstance(value, AlgebraicNumber):
            if value.field is not self:
                raise ParameterError(f"элемент поля q={value.field.q} в поле q={self.q}")
            return value
        if isinstance(value, str):
            return parse_token(value, self.q)
        return AlgebraicNumber(self, [_qq(value)])

    def _generator_interval(self) -> Any:
        lam = 2 * iv.cos(iv.pi / self.q)
        if self.group.is_even:
            return lam
        return (lam - 2 + iv.sqrt(lam * lam - 4 * lam + 8)) / 2

    def enclose(self, coeffs: Sequence[Any], prec: int) -> Any:
        """Интервальная оценка значения многочлена от образующей при точности prec"""
        with _IV_LOCK:
            saved = iv.prec
            iv.prec = prec
            try:
                generator = self._enclosures.get(prec)
                if generator is None:
                    generator = self._generator_interval()
                    self._enclosures[prec] = generator
                acc = iv.mpf(0)
                for c in coeffs:
                    acc = acc * generator + iv.mpf(int(c.numerator)) / iv.mpf(int(c.denominator))
                return acc
            finally:
                iv.prec = saved

    def generator_value(self) -> mpmath.mpf:
        lam = 2 * mp.cos(mp.pi / self.q)
        if self.group.is_even:
            return lam
        return (lam - 2 + mp.sqrt(lam * lam - 4 * lam + 8)) / 2


Scalar = Union[int, Fraction, "AlgebraicNumber"]


class AlgebraicNumber:
    """Точный элемент поля; равенство и знак определяются точно"""

    __slots__ = ("field", "coeffs")

    def __init__(self, field: NumberField, coeffs: Sequence[Any]) -> None:
        self.field = field
        self.coeffs = field.reduce(coeffs)

    def _coerce(self, other: Any) -> "AlgebraicNumber":
        if isinstance(other, AlgebraicNumber):
            if other.field is not self.field:
                raise ParameterError(f"элементы разных полей: q={self.field.q} и q={other.field.q}")
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return AlgebraicNumber(self.field, [_qq(other)])
        return NotImplemented

    def __add__(self, other: Scalar) -> "AlgebraicNumber":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return AlgebraicNumber(self.field, dup_add(list(self.coeffs), list(other.coeffs), QQ))

    __radd__ = __add__

    def __sub__(self, other: Scalar) -> "AlgebraicNumber":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return AlgebraicNumber(self.field, dup_sub(list(self.coeffs), list(other.coeffs), QQ))

    def __rsub__(self, other: Scalar) -> "AlgebraicNumber":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other - self

    def __mul__(self, other: Scalar) -> "AlgebraicNumber":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return AlgebraicNumber(self.field, dup_mul(list(self.coeffs), list(other.coeffs), QQ))

    __rmul__ = __mul__

    def inverse(self) -> "AlgebraicNumber":
        if not self.coeffs:
            raise ZeroDivisionError("деление на ноль в поле")
        try:
            return AlgebraicNumber(self.field, dup_invert(list(self.coeffs), self.field.modulus, QQ))
        except NotInvertible as e:
            raise InternalConsistencyError(f"элемент {self} необратим: модуль приводим") from e

    def __truediv__(self, other: Scalar) -> "AlgebraicNumber":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other: Scalar) -> "AlgebraicNumber":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self.inverse()

    def __pow__(self, exponent: int) -> "AlgebraicNumber":
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = self.field.one
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __neg__(self) -> "AlgebraicNumber":
        return AlgebraicNumber(self.field, dup_neg(list(self.coeffs), QQ))

    def __pos__(self) -> "AlgebraicNumber":
        return self

    def __abs__(self) -> "AlgebraicNumber":
        return -self if self.sign() < 0 else self

    def __eq__(self, other: object) -> bool:
        if isinstance(other, AlgebraicNumber) and other.field is not self.field:
            return False
        coerced = self._coerce(other)
        if coerced is NotImplemented:
            return NotImplemented
        return self.coeffs == coerced.coeffs

    def __hash__(self) -> int:
        return hash((self.field.q, self.coeffs))

    def __lt__(self, other: Scalar) -> bool:
        return compare(self, other) is Ordering.LT

    def __le__(self, other: Scalar) -> bool:
        return compare(self, other) is not Ordering.GT

    def __gt__(self, other: Scalar) -> bool:
        return compare(self, other) is Ordering.GT

    def __ge__(self, other: Scalar) -> bool:
        return compare(self, other) is not Ordering.LT

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    @property
    def is_rational(self) -> bool:
        return len(self.coeffs) <= 1

    def rational_value(self) -> Fraction:
        if not self.is_rational:
            raise ParameterError(f"{self} не рационально")
        return _to_fraction(self.coeffs[0]) if self.coeffs else Fraction(0)

    def sign(self) -> int:
        """Точный знак: ноль по канонической форме, иначе уточнение интервала до исключения нуля"""
        if not self.coeffs:
            return 0
        if self.is_rational:
            return 1 if self.coeffs[0] > 0 else -1
        prec = _START_PREC
        while prec <= _MAX_PREC:
            lo, hi = self.field.enclose(self.coeffs, prec)._mpi_
            if mpf_sign(lo) > 0:
                return 1
            if mpf_sign(hi) < 0:
                return -1
            prec *= 2
        raise InternalConsistencyError(f"знак {self} не определён до {_MAX_PREC} бит")

    def floor(self) -> int:
        if self.is_rational:
            return math.floor(self.rational_value())
        n = int(mpmath.floor(self.to_mpf(64)))
        while (self - n).sign() < 0:
            n -= 1
        while (self - (n + 1)).sign() >= 0:
            n += 1
        return n

    def ceil(self) -> int:
        return -((-self).floor())

    def to_mpf(self, prec: int = 128) -> mpmath.mpf:
        with mp.workprec(prec + 16):
            generator = self.field.generator_value()
            acc = mp.mpf(0)
            for c in self.coeffs:
                acc = acc * generator + _mp_value(c)
        with mp.workprec(prec):
            return +acc

    def __float__(self) -> float:
        return float(self.to_mpf(64))

    def coefficient_vector(self) -> List[str]:
        """Коэффициенты от младшего к старшему, как строки p/r"""
        return [str(_to_fraction(c)) for c in reversed(self.coeffs)]

    def to_dict(self) -> Dict[str, Any]:
        return {"basis": self.field.generator_name, "coefficients": self.coefficient_vector()}

    def __repr__(self) -> str:
        return f"AlgebraicNumber(q={self.field.q}, {self})"

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        symbol = self.field.generator_symbol
        terms = []
        top = len(self.coeffs) - 1
        for i, c in enumerate(self.coeffs):
            c = _to_fraction(c)
            if c == 0:
                continue
            power = top - i
            monomial = "" if power == 0 else (symbol if power == 1 else f"{symbol}^{power}")
            if monomial and abs(c) == 1:
                text = monomial
            elif monomial:
                text = f"{abs(c)}·{monomial}"
            else:
                text = str(abs(c))
            terms.append(("-" if c < 0 else "+", text))
        head_sign, head = terms[0]
        out = ("-" if head_sign == "-" else "") + head
        for s, text in terms[1:]:
            out += f" {s} {text}"
        return out


class BSequence:
    """B_0 = 0, B_1 = 1, B_n = λB_{n−1} − B_{n−2}; продлевается лениво в обе стороны"""

    def __init__(self, field: NumberField) -> None:
        self.field = field
        self._lock = threading.Lock()
        lam = field.lambda_
        self._forward = [field.zero, field.one]
        # _backward[k] = B_{-k}
        self._backward = [field.zero, lam * field.zero - field.one]

    @property
    def q(self) -> GroupIndex:
        return self.field.group

    @property
    def values(self) -> List[AlgebraicNumber]:
        with self._lock:
            return list(self._forward)

    def __getitem__(self, n: int) -> AlgebraicNumber:
        lam = self.field.lambda_
        with self._lock:
            if n >= 0:
                while len(self._forward) <= n:
                    self._forward.append(lam * self._forward[-1] - self._forward[-2])
                return self._forward[n]
            while len(self._backward) <= -n:
                self._backward.append(lam * self._backward[-1] - self._backward[-2])
            return self._backward[-n]


@lru_cache(maxsize=None)
def _field_cache(q: int) -> NumberField:
    return NumberField(GroupIndex(q))


def number_field(q: Union[int, GroupIndex]) -> NumberField:
    return _field_cache(group_index(q).q)


def lambda_(q: Union[int, GroupIndex]) -> AlgebraicNumber:
    """λ_q = 2cos(π/q)"""
    return number_field(q).lambda_


def b_n(q: Union[int, GroupIndex], n: int) -> AlgebraicNumber:
    return number_field(q).b[n]


def rho(q: Union[int, GroupIndex]) -> AlgebraicNumber:
    """Положительный корень x² + (2−λ)x − 1 для нечётного q"""
    group = group_index(q)
    if group.is_even:
        raise ParameterError(f"ρ определено только для нечётного q, q={group.q}")
    return number_field(group).generator


def check_alpha(q: Union[int, GroupIndex], alpha: AlgebraicNumber) -> None:
    lam = lambda_(q)
    if compare(alpha, Fraction(1, 2)) is Ordering.LT or compare(alpha * lam, 1) is Ordering.GT:
        raise ParameterError(f"α = {alpha} вне [1/2, 1/λ] для q={group_index(q).q}")


def delta_d(q: Union[int, GroupIndex], alpha: AlgebraicNumber, d: int) -> AlgebraicNumber:
    """δ_d = 1/((α+d)λ)"""
    if d < 1:
        raise ParameterError(f"d должно быть ≥ 1: {d}")
    check_alpha(q, alpha)
    return 1 / ((alpha + d) * lambda_(q))


def compare(a: Scalar, b: Scalar) -> Ordering:
    if isinstance(a, AlgebraicNumber):
        diff = a - b
    elif isinstance(b, AlgebraicNumber):
        diff = -(b - a)
    else:
        diff_value = _to_fraction(a) - _to_fraction(b)
        return Ordering.LT if diff_value < 0 else Ordering.GT if diff_value > 0 else Ordering.EQ
    sign = diff.sign()
    return Ordering.LT if sign < 0 else Ordering.GT if sign > 0 else Ordering.EQ


def parse_token(text: str, q: Union[int, GroupIndex]) -> AlgebraicNumber:
    """Разобрать выражение от lambda/rho с рациональными коэффициентами: '53/100', '1/lambda', '-0.3'"""
    field = number_field(q)
    cleaned = _LAMBDA_WORD.sub("lam", text.strip()).replace("ρ", "rho")
    try:
        expr = sympify(cleaned, locals={"lam": LAM, "rho": RHO}, rational=True)
        extra = expr.free_symbols - {LAM, RHO}
        if extra:
            raise ParameterError(f"неизвестные символы в {text!r}: {sorted(map(str, extra))}")
        if RHO in expr.free_symbols and field.group.is_even:
            raise ParameterError(f"ρ не определено для чётного q={field.q}")
        num, den = fraction(together(expr))
        values = []
        for part in (num, den):
            poly = Poly(part, LAM, RHO, domain=QQ)
            value = field.zero
            for (i, j), coeff in poly.terms():
                term = field(_to_fraction(coeff)) * field.lambda_**i
                if j:
                    term = term * field.generator**j
                value = value + term
            values.append(value)
    except (SympifyError, SyntaxError, TypeError, ValueError, BasePolynomialError) as e:
        raise ParameterError(f"не удалось разобрать {text!r}: {e}") from e
    if not values[1]:
        raise ParameterError(f"нулевой знаменатель в {text!r}")
    return values[0] / values[1]


def b_identity_defects(q: Union[int, GroupIndex]) -> List[Tuple[int, int, int, int, int]]:
    """Наборы (m1, m2, m3, m4, n) с m1−m2 = m3−m4, на которых нарушено
    B_{n+m1}B_{−n+m2} − B_{n+m3}B_{−n+m4} = B_{m1−m3}B_{m2+m3}.

    Индексы берутся по модулю 2q: периодичность B проверяется отдельно.
    """
    field = number_field(q)
    period = 2 * field.q
    values = [field.b[i] for i in range(period)]
    products = [[a * b for b in values] for a in values]
    defects: List[Tuple[int, int, int, int, int]] = []
    for m1 in range(period):
        for m2 in range(period):
            for m3 in range(period):
                m4 = (m3 - m1 + m2) % period
                rhs = products[(m1 - m3) % period][(m2 + m3) % period]
                for n in range(period):
                    lhs = products[(n + m1) % period][(m2 - n) % period] - products[(n + m3) % period][(m4 - n) % period]
                    if lhs != rhs:
                        defects.append((m1, m2, m3, m4, n))
    logger.debug(f"B-тождество для q={field.q}: нарушений {len(defects)}")
    return defects
