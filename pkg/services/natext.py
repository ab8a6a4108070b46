from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import mpmath
from loguru import logger
from mpmath import mp

from services.algebra import AlgebraicNumber, b_n, compare, group_index, lambda_, number_field, rho
from services.errors import DomainError, InternalConsistencyError, OrbitTerminated, ParameterError
from services.expansion import Params, digit_of, expand, orbit, t_alpha
from storage.models import (
    TERMINAL_DIGIT,
    Certificate,
    ChainCheck,
    Digit,
    DomainMass,
    EndpointOrbits,
    GroupIndex,
    NatExtDomain,
    NormalizingConstant,
    Ordering,
    Rectangle,
    Regime,
)

AlphaLike = Union[str, int, Fraction, AlgebraicNumber]
Term = Tuple[str, int]

MINUS_ONE = Digit(-1, 1)
PLUS_ONE = Digit(1, 1)

EVEN_REGIMES = (Regime.EVEN_INTERIOR, Regime.EVEN_HALF, Regime.EVEN_INV_LAMBDA)
ODD_FIRST_FAMILY = (Regime.ODD_HIGH, Regime.ODD_INV_LAMBDA, Regime.ODD_RHO)
ODD_SECOND_FAMILY = (Regime.ODD_LOW, Regime.ODD_HALF)


@lru_cache(maxsize=256)
def make_params(q: Union[int, GroupIndex], alpha: AlphaLike, precision: int = 128) -> Params:
    group = group_index(q)
    if isinstance(alpha, str):
        return Params.from_tokens(group, alpha, precision)
    return Params(group, number_field(group)(alpha), precision)


def _float(value: Any) -> float:
    return float(value) if not isinstance(value, AlgebraicNumber) else float(value.to_mpf(64))


def _check(label: str, lhs: Any, rhs: Any, relation: str) -> ChainCheck:
    outcome = compare(lhs, rhs)
    expected = {"<": (Ordering.LT,), "=": (Ordering.EQ,), "≤": (Ordering.LT, Ordering.EQ), ">": (Ordering.GT,)}
    ok = outcome in expected[relation]
    if not ok:
        logger.warning(f"Нарушено {label}: получено {outcome.value}")
    return ChainCheck(label, relation, outcome, ok, _float(lhs), _float(rhs))


def classify(q: Union[int, GroupIndex], alpha: AlphaLike) -> Regime:
    """Режим по чётности q и точным сравнениям α с 1/2, ρ/λ, 1/λ"""
    params = make_params(q, alpha)
    group = params.q
    half = params.alpha == Fraction(1, 2)
    inverse_lambda = params.right == 1
    if group.is_even:
        if half:
            return Regime.EVEN_HALF
        return Regime.EVEN_INV_LAMBDA if inverse_lambda else Regime.EVEN_INTERIOR
    if half:
        return Regime.ODD_HALF
    if inverse_lambda:
        return Regime.ODD_INV_LAMBDA
    ordering = compare(params.right, rho(group))
    if ordering is Ordering.LT:
        return Regime.ODD_LOW
    return Regime.ODD_RHO if ordering is Ordering.EQ else Regime.ODD_HIGH


def merge_index(group: GroupIndex, regime: Regime) -> int:
    """Длина орбит концов, нужная для цепочки режима"""
    if group.is_even:
        return group.p if regime is Regime.EVEN_INTERIOR else group.p - 1
    h = group.h
    return {
        Regime.ODD_LOW: 2 * h + 2,
        Regime.ODD_HALF: 2 * h + 1,
        Regime.ODD_RHO: max(2 * h, 1),
        Regime.ODD_HIGH: h + 2,
        Regime.ODD_INV_LAMBDA: h + 1,
    }[regime]


def _padded_orbit(x: AlgebraicNumber, k: int, params: Params) -> Tuple[List[AlgebraicNumber], List[Digit]]:
    path = orbit(x, k, params)
    points = list(path.points)
    digits = list(path.digits)
    zero = params.field(0)
    while len(points) < k + 1:
        points.append(zero)
    while len(digits) < k:
        digits.append(TERMINAL_DIGIT)
    return points, digits


def _b(group: GroupIndex) -> Callable[[int], AlgebraicNumber]:
    return lambda n: b_n(group, n)


def _closed_form_checks(params: Params, orbits: EndpointOrbits) -> List[ChainCheck]:
    group, B = params.q, _b(params.q)
    al = params.right
    k = orbits.meet_index
    checks: List[ChainCheck] = []
    for n in range(1, k + 1):
        if orbits.digits_l[:n] == [MINUS_ONE] * n:
            denominator = B(n) * al - B(n + 1)
            if denominator:
                value = -(B(n + 1) * al - B(n + 2)) / denominator
                checks.append(_check(f"ℓ_{n} = −(B_{n+1}αλ−B_{n+2})/(B_{n}αλ−B_{n+1})", orbits.ell[n], value, "="))
        if orbits.digits_r[:n] == [PLUS_ONE] + [MINUS_ONE] * (n - 1):
            denominator = B(n) * al - B(n - 1)
            if denominator:
                value = -(B(n + 1) * al - B(n)) / denominator
                checks.append(_check(f"r_{n} = −(B_{n+1}αλ−B_{n})/(B_{n}αλ−B_{n-1})", orbits.r[n], value, "="))
    if group.is_even:
        return checks

    h = group.h
    pattern = [MINUS_ONE] * h + [Digit(-1, 2)] + [MINUS_ONE] * h
    pattern_r = [Digit(1, pattern[0].d)] + pattern[1:]
    s = lambda n: B(n + 1) + B(n)
    c = lambda n: B(n + 2) - B(n + 1) + 2 * B(n)
    el = params.left
    for n in range(1, h + 2):
        index = h + n
        if index > k:
            break
        denominator = s(n - 1) * el + c(n - 1)
        if orbits.digits_l[:index] == pattern[:index] and denominator:
            value = -(s(n) * el + c(n)) / denominator
            checks.append(_check(f"ℓ_{index} по формуле для (−1:1)^h(−1:2)(−1:1)^h", orbits.ell[index], value, "="))
        denominator = s(n - 1) * al - c(n - 1)
        if orbits.digits_r[:index] == pattern_r[:index] and denominator:
            value = -(s(n) * al - c(n)) / denominator
            checks.append(_check(f"r_{index} по формуле для (+1:{pattern[0].d})…", orbits.r[index], value, "="))
    return checks


def endpoint_orbits(q: Union[int, GroupIndex], alpha: AlphaLike) -> EndpointOrbits:
    """Точные орбиты ℓ_n, r_n до индекса слияния с проверкой замкнутых форм"""
    params = make_params(q, alpha)
    regime = classify(params.q, params.alpha)
    k = merge_index(params.q, regime)
    ell, digits_l = _padded_orbit(params.left, k, params)
    r, digits_r = _padded_orbit(params.right, k, params)
    orbits = EndpointOrbits(ell=ell, r=r, digits_l=digits_l, digits_r=digits_r, meet_index=k)
    orbits.closed_form_checks = _closed_form_checks(params, orbits)
    failed = [check.label for check in orbits.closed_form_checks if not check.ok]
    if failed:
        logger.error(f"Итерации T_α расходятся с замкнутыми формами: {failed}")
        raise InternalConsistencyError(f"замкнутые формы не совпали: {failed}")
    return orbits


def _chain_template(group: GroupIndex, regime: Regime) -> List[List[Term]]:
    """Цепочка групп равных членов; группы строго возрастают"""
    L = lambda n: ("l", n)
    R = lambda n: ("r", n)
    D = lambda d: ("d", d)
    ZERO = ("0", 0)
    if group.is_even:
        p = group.p
        if regime is Regime.EVEN_INTERIOR:
            chain = [[L(0)]]
            for n in range(1, p - 1):
                chain += [[R(n)], [L(n)]]
            return chain + [[D(1)], [R(p - 1)], [ZERO], [L(p - 1)], [R(0)]]
        if regime is Regime.EVEN_HALF:
            chain = [[L(0)]] + [[R(n), L(n)] for n in range(1, p - 1)]
            return chain + [[D(1)], [R(p - 1), L(p - 1), ZERO], [R(0)]]
        chain = [[L(n), R(n + 1)] for n in range(0, p - 1)]
        chain[-1].append(D(1))
        return chain + [[ZERO], [R(0)]]

    h = group.h
    if regime is Regime.ODD_LOW:
        chain = [] if h else [[D(1)]]
        for j in range(h):
            chain += [[L(j)], [R(h + 1 + j)], [L(h + 1 + j)]]
            if j == h - 1:
                chain.append([D(1)])
            chain.append([R(j + 1)])
        # положение r_{2h+1} относительно −δ_2 зависит от α, см. _cylinder_checks
        return chain + [[L(h)], [R(2 * h + 1)], [ZERO], [L(2 * h + 1)], [R(0)]]
    if regime is Regime.ODD_HALF:
        chain = [[L(0)]] if h else [[D(1)], [L(0)]]
        for j in range(h):
            chain.append([R(h + 1 + j), L(h + 1 + j)])
            if j == h - 1:
                chain.append([D(1)])
            chain.append([R(j + 1), L(j + 1)])
        return chain + [[D(2)], [R(2 * h + 1), L(2 * h + 1), ZERO], [R(0)]]
    if regime is Regime.ODD_RHO:
        if h == 0:
            return [[D(1)], [L(0), R(1), L(1), D(2)], [ZERO], [R(0)]]
        chain = []
        for j in range(h):
            chain += [[L(j), R(h + 1 + j)], [L(h + 1 + j), R(j + 1)]]
        chain[-1].append(D(1))
        return chain + [[L(h)], [D(2)], [ZERO], [R(0)]]
    if regime is Regime.ODD_HIGH:
        chain = []
        for n in range(1, h + 1):
            chain += [[L(n - 1)], [R(n)]]
        return chain + [[D(1)], [L(h)], [ZERO], [R(h + 1)], [R(0)]]
    chain = [[L(n - 1), R(n)] for n in range(1, h + 1)]
    return chain + [[D(1)], [L(h), R(h + 1), ZERO], [R(0)]]


def _term_label(term: Term) -> str:
    kind, index = term
    return {"l": f"ℓ_{index}", "r": f"r_{index}", "d": f"−δ_{index}", "0": "0"}[kind]


def _term_value(term: Term, params: Params, orbits: EndpointOrbits) -> AlgebraicNumber:
    kind, index = term
    if kind == "l":
        return orbits.ell[index]
    if kind == "r":
        return orbits.r[index]
    if kind == "d":
        return -params.delta(index)
    return params.field(0)


def _chain_checks(params: Params, regime: Regime, orbits: EndpointOrbits) -> List[ChainCheck]:
    checks: List[ChainCheck] = []
    previous: Optional[Term] = None
    for group in _chain_template(params.q, regime):
        if previous is not None:
            first = group[0]
            checks.append(
                _check(f"{_term_label(previous)} < {_term_label(first)}",
                       _term_value(previous, params, orbits), _term_value(first, params, orbits), "<")
            )
        for left, right in zip(group, group[1:]):
            checks.append(
                _check(f"{_term_label(left)} = {_term_label(right)}",
                       _term_value(left, params, orbits), _term_value(right, params, orbits), "=")
            )
        previous = group[-1]
    return checks


def critical_digits(regime: Regime, group: GroupIndex, orbits: EndpointOrbits) -> Dict[str, int]:
    if regime is Regime.EVEN_INTERIOR:
        p = group.p
        return {"d_p(l0)": orbits.digits_l[p - 1].d, "d_p(r0)": orbits.digits_r[p - 1].d}
    if regime is Regime.ODD_LOW:
        k = 2 * group.h + 1
        return {"d_2h+2(l0)": orbits.digits_l[k].d, "d_2h+2(r0)": orbits.digits_r[k].d}
    if regime is Regime.ODD_HIGH:
        h = group.h
        return {"d_h+1(l0)": orbits.digits_l[h].d, "d_h+2(r0)": orbits.digits_r[h + 1].d}
    return {}


def _merge_checks(regime: Regime, group: GroupIndex, orbits: EndpointOrbits, digits: Dict[str, int]) -> List[ChainCheck]:
    checks: List[ChainCheck] = []
    if regime is Regime.EVEN_INTERIOR:
        p = group.p
        checks.append(_check(f"ℓ_{p} = r_{p}", orbits.ell[p], orbits.r[p], "="))
        checks.append(_check("d_p(r_0) = d_p(ℓ_0) + 1", digits["d_p(r0)"], digits["d_p(l0)"] + 1, "="))
    elif regime is Regime.ODD_LOW:
        k = 2 * group.h + 2
        checks.append(_check(f"ℓ_{k} = r_{k}", orbits.ell[k], orbits.r[k], "="))
        checks.append(_check("d_2h+2(r_0) = d_2h+2(ℓ_0) + 1", digits["d_2h+2(r0)"], digits["d_2h+2(l0)"] + 1, "="))
    elif regime is Regime.ODD_HIGH:
        h = group.h
        checks.append(_check(f"ℓ_{h + 1} = r_{h + 2}", orbits.ell[h + 1], orbits.r[h + 2], "="))
        checks.append(_check("d_h+1(ℓ_0) = d_h+2(r_0) + 1", digits["d_h+1(l0)"], digits["d_h+2(r0)"] + 1, "="))
    return checks


def _cylinder_checks(params: Params, regime: Regime, orbits: EndpointOrbits) -> List[ChainCheck]:
    """Для нижнего нечётного режима: ℓ_h < −δ_2 и r_{2h+1} в своём цилиндре −δ_{d−1} ≤ r_{2h+1} < −δ_d"""
    if regime is not Regime.ODD_LOW:
        return []
    h = params.q.h
    k = 2 * h + 1
    point, d = orbits.r[k], orbits.digits_r[k].d
    checks = [
        _check(f"ℓ_{h} < −δ_2", orbits.ell[h], -params.delta(2), "<"),
        _check(f"r_{k} < −δ_{d}", point, -params.delta(d), "<"),
    ]
    if d >= 2:
        checks.append(_check(f"−δ_{d - 1} ≤ r_{k}", -params.delta(d - 1), point, "≤"))
    return checks


def phi_checks(params: Params, orbits: EndpointOrbits) -> List[ChainCheck]:
    """φ_0 = −λ/2 ≤ ℓ_0 ≤ r_1 ≤ φ_1 (равенство r_1 = φ_1 ровно при α = 1/2) и разложение −λ/2"""
    group, lam = params.q, params.lam
    checks: List[ChainCheck] = []
    if group.q >= 4:
        phi0, phi1 = -lam / 2, -(lam * lam - 2) / lam
        r1 = t_alpha(params.right, params)
        checks.append(_check("φ_0 ≤ ℓ_0", phi0, params.left, "≤"))
        checks.append(_check("ℓ_0 ≤ r_1", params.left, r1, "≤"))
        half = params.alpha == Fraction(1, 2)
        # при α = 1/2 T_α чётно и r_1 = T_α(λ/2) = 2/λ − λ = φ_1
        if half:
            checks.append(_check("r_1 = φ_1", r1, phi1, "="))
        else:
            checks.append(_check("r_1 < φ_1", r1, phi1, "<"))
        checks.append(_check("φ_0 = ℓ_0 ⇔ α = 1/2", int(phi0 == params.left), int(half), "="))
        checks.append(_check("ℓ_0 = r_1 ⇔ α = 1/λ", int(params.left == r1), int(params.right == 1), "="))
    half_params = make_params(group, Fraction(1, 2), params.precision)
    phi_expansion = expand(-lam / 2, 4 * group.q, half_params)
    if group.is_even:
        expected = [MINUS_ONE] * (group.p - 1)
    else:
        expected = [MINUS_ONE] * group.h + [Digit(-1, 2)] + [MINUS_ONE] * group.h
    matches = list(phi_expansion.digits) == expected and phi_expansion.terminated
    checks.append(_check("−λ/2 = [(−1:1)…] при α = 1/2", int(matches), 1, "="))
    return checks


def verify_ordering(q: Union[int, GroupIndex], alpha: AlphaLike) -> Certificate:
    params = make_params(q, alpha)
    regime = classify(params.q, params.alpha)
    orbits = endpoint_orbits(params.q, params.alpha)
    digits = critical_digits(regime, params.q, orbits)
    certificate = Certificate(q=params.q.q, alpha=str(params.alpha), regime=regime, critical_digits=digits)
    certificate.extend(_chain_checks(params, regime, orbits))
    certificate.extend(_merge_checks(regime, params.q, orbits, digits))
    certificate.extend(_cylinder_checks(params, regime, orbits))
    certificate.extend(orbits.closed_form_checks)
    certificate.extend(phi_checks(params, orbits))
    logger.info(
        f"Порядок q={params.q.q}, α={params.alpha}: {regime.value}, "
        f"{len(certificate.checks)} сравнений, {'PASS' if certificate.ok else 'FAIL'}"
    )
    return certificate


def _even_heights(group: GroupIndex) -> List[AlgebraicNumber]:
    p, B = group.p, _b(group)
    values: Dict[int, AlgebraicNumber] = {}
    for n in range(1, p):
        values[2 * n] = B(n) / B(n + 1)
    for n in range(1, p + 1):
        values[2 * n - 1] = (B(p - n) - B(p + 1 - n)) / (B(p - 1 - n) - B(p - n))
    return [values[i] for i in range(1, 2 * p)]


def _odd_first_heights(group: GroupIndex) -> List[AlgebraicNumber]:
    h, B = group.h, _b(group)
    values: Dict[int, AlgebraicNumber] = {}
    for n in range(1, h + 2):
        values[2 * n] = B(n) / B(n + 1)
        values[2 * n - 1] = (B(n - 1) + B(n)) / (B(n) + B(n + 1))
    return [values[i] for i in range(1, 2 * h + 3)]


def _odd_second_heights(group: GroupIndex) -> List[AlgebraicNumber]:
    h, B, r = group.h, _b(group), rho(group)
    values: Dict[int, AlgebraicNumber] = {}
    for n in range(1, h + 1):
        values[4 * n] = B(n) / B(n + 1)
    for n in range(1, h + 2):
        values[4 * n - 2] = (B(n - 1) + B(n)) / (B(n) + B(n + 1))
    for n in range(0, h + 1):
        values[4 * h + 3 - 4 * n] = (B(n + 1) * r - B(n)) / (B(n) * r - B(n - 1))
        values[4 * h + 1 - 4 * n] = (B(n + 1) * r - B(n + 2)) / (B(n) * r - B(n + 1))
    return [values[i] for i in range(1, 4 * h + 4)]


def _relation(label: str, heights: Sequence[AlgebraicNumber], indices: Sequence[int],
              build: Callable[..., Tuple[Any, Any]]) -> ChainCheck:
    if any(i < 1 or i > len(heights) for i in indices):
        return ChainCheck(label, "skip", None, True, skipped=True)
    lhs, rhs = build(*[heights[i - 1] for i in indices])
    return _check(label, lhs, rhs, "=")


def height_relations(q: Union[int, GroupIndex], alpha: AlphaLike) -> List[ChainCheck]:
    """Все соотношения (R_i) системы высот активного режима"""
    params = make_params(q, alpha)
    regime = classify(params.q, params.alpha)
    H = heights_unchecked(params.q, regime)
    lam = params.lam
    checks: List[ChainCheck] = []
    if regime in EVEN_REGIMES:
        p = params.q.p
        checks.append(_relation("R1: H_1 = 1/(λ+H_{2p−1})", H, [1, 2 * p - 1], lambda a, b: (a, 1 / (lam + b))))
        checks.append(_relation("R2: H_2 = 1/λ", H, [2], lambda a: (a, 1 / lam)))
        for n in range(3, 2 * p):
            checks.append(_relation(f"R{n}: H_{n} = 1/(λ−H_{n-2})", H, [n, n - 2], lambda a, b: (a, 1 / (lam - b))))
        checks.append(_relation(f"R{2 * p}: H_{2 * p - 2} = λ/2", H, [2 * p - 2], lambda a: (a, lam / 2)))
        checks.append(_relation(f"R{2 * p + 1}: H_{2 * p - 3} + H_{2 * p - 1} = λ", H, [2 * p - 3, 2 * p - 1],
                                lambda a, b: (a + b, lam)))
    elif regime in ODD_FIRST_FAMILY:
        h = params.q.h
        checks.append(_relation("R1: H_1 = 1/(λ+H_{2h+2})", H, [1, 2 * h + 2], lambda a, b: (a, 1 / (lam + b))))
        checks.append(_relation("R2: H_2 = 1/λ", H, [2], lambda a: (a, 1 / lam)))
        for n in range(3, 2 * h + 3):
            checks.append(_relation(f"R{n}: H_{n} = 1/(λ−H_{n-2})", H, [n, n - 2], lambda a, b: (a, 1 / (lam - b))))
        checks.append(_relation(f"R{2 * h + 3}: H_{2 * h + 1} = λ/2", H, [2 * h + 1], lambda a: (a, lam / 2)))
        checks.append(_relation(f"R{2 * h + 4}: H_{2 * h} + H_{2 * h + 2} = λ", H, [2 * h, 2 * h + 2],
                                lambda a, b: (a + b, lam)))
    else:
        h, r = params.q.h, rho(params.q)
        checks.append(_relation("R1: H_1 = 1/(2λ−H_{4h−1})", H, [1, 4 * h - 1], lambda a, b: (a, 1 / (2 * lam - b))))
        checks.append(_relation("R2: H_2 = 1/(2λ−H_{4h})", H, [2, 4 * h], lambda a, b: (a, 1 / (2 * lam - b))))
        checks.append(_relation("R3: H_3 = 1/(λ+H_{4h+3})", H, [3, 4 * h + 3], lambda a, b: (a, 1 / (lam + b))))
        checks.append(_relation("R4: H_4 = 1/λ", H, [4], lambda a: (a, 1 / lam)))
        for n in range(5, 4 * h + 4):
            checks.append(_relation(f"R{n}: H_{n} = 1/(λ−H_{n-4})", H, [n, n - 4], lambda a, b: (a, 1 / (lam - b))))
        checks.append(_relation(f"R{4 * h + 4}: H_{4 * h + 2} = λ/2", H, [4 * h + 2], lambda a: (a, lam / 2)))
        checks.append(_relation(f"R{4 * h + 5}: H_{4 * h + 1} + H_{4 * h + 3} = λ", H, [4 * h + 1, 4 * h + 3],
                                lambda a, b: (a + b, lam)))
        checks.append(_relation("H_{4h+3}² + (2−λ)H_{4h+3} − 1 = 0", H, [4 * h + 3],
                                lambda a: (a * a + (2 - lam) * a - 1, 0)))
        checks.append(_relation("H_{4h+3} = ρ", H, [4 * h + 3], lambda a: (a, r)))
    return checks


def heights_unchecked(group: GroupIndex, regime: Regime) -> List[AlgebraicNumber]:
    if regime in EVEN_REGIMES:
        return _even_heights(group)
    if regime in ODD_FIRST_FAMILY:
        return _odd_first_heights(group)
    return _odd_second_heights(group)


def heights(q: Union[int, GroupIndex], alpha: AlphaLike) -> List[AlgebraicNumber]:
    """Высоты H_1, H_2, … режима; каждое соотношение (R_i) проверяется точно"""
    params = make_params(q, alpha)
    regime = classify(params.q, params.alpha)
    failed = [check.label for check in height_relations(params.q, params.alpha) if not check.ok]
    if failed:
        logger.error(f"Высоты не удовлетворяют системе: {failed}")
        raise InternalConsistencyError(f"нарушены соотношения высот: {failed}")
    return heights_unchecked(params.q, regime)


def _even_inverse_lambda_rectangles(group: GroupIndex) -> List[Rectangle]:
    p, B = group.p, _b(group)
    rectangles = []
    for n in range(1, p):
        left = (B(n) - B(n + 1)) / (B(n) - B(n - 1))
        right = (B(n + 1) - B(n + 2)) / (B(n + 1) - B(n))
        rectangles.append(Rectangle(left, right, B(n) / B(n + 1), f"J_{2 * n}"))
    return rectangles


def half_domain_rectangles(group: GroupIndex) -> List[Rectangle]:
    """Ω_{1/2} для чётного q в форме через B_n"""
    p, B, lam = group.p, _b(group), lambda_(group)
    rectangles = []
    for n in range(p - 1, 0, -1):
        rectangles.append(
            Rectangle(-B(n) / B(n + 1), -B(n - 1) / B(n), (B(n) - B(n + 1)) / (B(n - 1) - B(n)), f"J_{2 * (p - n) - 1}")
        )
    field = number_field(group)
    rectangles.append(Rectangle(field.zero, lam / 2, field.one, f"J_{2 * p - 1}"))
    return rectangles


def _raw_rectangles(params: Params, regime: Regime, orbits: EndpointOrbits, H: List[AlgebraicNumber]) -> List[Rectangle]:
    group = params.q
    ell, r = orbits.ell, orbits.r
    Hn = lambda n: H[n - 1]
    rectangles: List[Rectangle] = []
    if regime in (Regime.EVEN_INTERIOR, Regime.EVEN_HALF):
        p = group.p
        for n in range(1, p):
            rectangles.append(Rectangle(ell[n - 1], r[n], Hn(2 * n - 1), f"J_{2 * n - 1}"))
            rectangles.append(Rectangle(r[n], ell[n], Hn(2 * n), f"J_{2 * n}"))
        rectangles.append(Rectangle(ell[p - 1], r[0], Hn(2 * p - 1), f"J_{2 * p - 1}"))
    elif regime is Regime.EVEN_INV_LAMBDA:
        rectangles = _even_inverse_lambda_rectangles(group)
    elif regime in (Regime.ODD_HIGH, Regime.ODD_INV_LAMBDA):
        h = group.h
        for n in range(1, h + 1):
            rectangles.append(Rectangle(ell[n - 1], r[n], Hn(2 * n - 1), f"J_{2 * n - 1}"))
            rectangles.append(Rectangle(r[n], ell[n], Hn(2 * n), f"J_{2 * n}"))
        rectangles.append(Rectangle(ell[h], r[h + 1], Hn(2 * h + 1), f"J_{2 * h + 1}"))
        rectangles.append(Rectangle(r[h + 1], r[0], Hn(2 * h + 2), f"J_{2 * h + 2}"))
    elif regime in ODD_SECOND_FAMILY:
        h = group.h
        for n in range(1, h + 1):
            rectangles.append(Rectangle(ell[n - 1], r[h + n], Hn(4 * n - 3), f"J_{4 * n - 3}"))
            rectangles.append(Rectangle(r[h + n], ell[h + n], Hn(4 * n - 2), f"J_{4 * n - 2}"))
            rectangles.append(Rectangle(ell[h + n], r[n], Hn(4 * n - 1), f"J_{4 * n - 1}"))
            rectangles.append(Rectangle(r[n], ell[n], Hn(4 * n), f"J_{4 * n}"))
        rectangles.append(Rectangle(ell[h], r[2 * h + 1], Hn(4 * h + 1), f"J_{4 * h + 1}"))
        rectangles.append(Rectangle(r[2 * h + 1], ell[2 * h + 1], Hn(4 * h + 2), f"J_{4 * h + 2}"))
        rectangles.append(Rectangle(ell[2 * h + 1], r[0], Hn(4 * h + 3), f"J_{4 * h + 3}"))
    else:
        h = group.h
        for j in range(1, h + 1):
            rectangles.append(Rectangle(ell[j - 1], r[j], Hn(2 * j - 1), f"J_{2 * j - 1}"))
            rectangles.append(Rectangle(r[j], ell[j], Hn(2 * j), f"J_{2 * j}"))
        rectangles.append(Rectangle(ell[h], r[0], params.lam / 2, f"J_{2 * h + 1}"))
    return rectangles


@lru_cache(maxsize=64)
def _cached_domain(q: int, alpha_key: Tuple[Any, ...]) -> NatExtDomain:
    field = number_field(q)
    alpha = AlgebraicNumber(field, alpha_key)
    params = make_params(q, alpha)
    regime = classify(params.q, alpha)
    orbits = endpoint_orbits(params.q, alpha)
    H = heights(params.q, alpha)
    raw = _raw_rectangles(params, regime, orbits, H)
    rectangles = [rect for rect in raw if rect.left != rect.right]
    if rectangles[0].left != params.left or rectangles[-1].right != params.right:
        raise InternalConsistencyError("прямоугольники не покрывают [ℓ_0, r_0)")
    for rect, following in zip(rectangles, rectangles[1:]):
        if rect.right != following.left:
            raise InternalConsistencyError(f"{rect.label} и {following.label} не стыкуются")
    for rect in rectangles:
        if compare(rect.left, rect.right) is not Ordering.LT:
            raise InternalConsistencyError(f"{rect.label}: левый конец не меньше правого")
    domain = NatExtDomain(
        q=params.q,
        alpha=alpha,
        regime=regime,
        rectangles=tuple(rectangles),
        critical_digits=critical_digits(regime, params.q, orbits),
        dropped=len(raw) - len(rectangles),
    )
    logger.info(f"Построена Ω_α для q={q}, α={alpha}: {regime.value}, {len(rectangles)} прямоугольников")
    return domain


def build_domain(q: Union[int, GroupIndex], alpha: AlphaLike) -> NatExtDomain:
    """Ω_α: упорядоченные прямоугольники J_n × [0, H_n], пустые J_n отброшены"""
    params = make_params(q, alpha)
    return _cached_domain(params.q.q, params.alpha.coeffs)


def domain_checks(domain: NatExtDomain) -> List[ChainCheck]:
    """Сверка с альтернативными формами Ω_{1/2} и Ω_{1/λ} для чётного q"""
    checks: List[ChainCheck] = []
    group = domain.q
    if domain.regime is Regime.EVEN_HALF:
        expected = half_domain_rectangles(group)
        checks.append(_check("Ω_{1/2}: число прямоугольников", len(domain.rectangles), len(expected), "="))
        for rect, other in zip(domain.rectangles, expected):
            checks.append(_check(f"Ω_{{1/2}} {rect.label}: левый конец", rect.left, other.left, "="))
            checks.append(_check(f"Ω_{{1/2}} {rect.label}: высота", rect.height, other.height, "="))
    if domain.regime is Regime.EVEN_INV_LAMBDA:
        orbits = endpoint_orbits(group, domain.alpha)
        for n, rect in enumerate(domain.rectangles, start=1):
            checks.append(_check(f"Ω_{{1/λ}}: левый конец J_{2 * n} = r_{n}", rect.left, orbits.r[n], "="))
        checks.append(_check("Ω_{1/λ}: r_{p−1} = −δ_1", orbits.r[group.p - 1], -make_params(group, domain.alpha).delta(1), "="))
    checks.append(_check("r_0 − ℓ_0 = λ", domain.right - domain.left, lambda_(group), "="))
    return checks


def domain_contains(domain: NatExtDomain, t: Any, v: Any) -> bool:
    """Точная принадлежность (t, v) области Ω_α"""
    if isinstance(t, AlgebraicNumber):
        if v < 0:
            return False
        for rect in domain.rectangles:
            if rect.left <= t and t < rect.right:
                return v <= rect.height
        return False
    for rect in domain.rectangles:
        if float(rect.left.to_mpf(64)) <= float(t) < float(rect.right.to_mpf(64)):
            return 0 <= float(v) <= float(rect.height.to_mpf(64))
    return False


def _coerce_point(point: Tuple[Any, Any], params: Params) -> Tuple[Any, Any, bool]:
    t, v = point
    if isinstance(t, (AlgebraicNumber, int, Fraction)) and isinstance(v, (AlgebraicNumber, int, Fraction)):
        return params.field(t), params.field(v), True
    with mp.workprec(params.precision):
        t = t.to_mpf(params.precision) if isinstance(t, AlgebraicNumber) else mp.mpf(t)
        v = v.to_mpf(params.precision) if isinstance(v, AlgebraicNumber) else mp.mpf(v)
        return t, v, False


def two_dim_map(point: Tuple[Any, Any], q: Union[int, GroupIndex], alpha: AlphaLike, precision: int = 128) -> Tuple[Any, Any]:
    """𝒯_α(t, v) = (T_α(t), 1/(d(t)λ + ε(t)v))"""
    params = make_params(q, alpha, precision)
    t, v, exact = _coerce_point(point, params)
    digit = digit_of(t, params)
    if digit.is_terminal:
        raise OrbitTerminated("t = 0: орбита завершилась")
    if exact:
        return t_alpha(t, params), 1 / (digit.d * params.lam + digit.epsilon * v)
    with mp.workprec(params.precision):
        lam = params.lam.to_mpf(params.precision)
        return t_alpha(t, params), 1 / (digit.d * lam + digit.epsilon * v)


def two_dim_inverse(point: Tuple[Any, Any], q: Union[int, GroupIndex], alpha: AlphaLike, precision: int = 128) -> Tuple[Any, Any]:
    """𝒯_α⁻¹: прообраз, цифра которого согласована с первой координатой"""
    params = make_params(q, alpha, precision)
    domain = build_domain(params.q, params.alpha)
    t_next, v_next, exact = _coerce_point(point, params)
    if not v_next > 0:
        raise DomainError(f"v' = {v_next} ≤ 0: у точки нет прообраза")
    with mp.workprec(params.precision):
        lam = params.lam if exact else params.lam.to_mpf(params.precision)
        s = 1 / v_next
        ratio = s / lam
        base_floor = ratio.floor() if exact else int(mp.floor(ratio))
        base_ceil = ratio.ceil() if exact else int(mp.ceil(ratio))
        # ε = +1: s = dλ + v, ε = −1: s = dλ − v
        candidates = [(1, base_floor), (-1, base_ceil), (1, base_floor - 1), (-1, base_ceil + 1)]
        for epsilon, d in candidates:
            if d < 1:
                continue
            denominator = t_next + d * lam
            if denominator == 0:
                continue
            t = epsilon / denominator
            v = epsilon * (s - d * lam)
            try:
                digit = digit_of(t, params)
            except DomainError:
                continue
            if digit == Digit(epsilon, d) and domain_contains(domain, t, v):
                return t, v
    raise DomainError(f"у точки {point} нет прообраза в Ω_α")


def domain_mass(domain: NatExtDomain, precision: int = 128) -> DomainMass:
    """∑ log((1+bH)/(1+aH)) через точное произведение аргументов"""
    product = number_field(domain.q)(1)
    for rect in domain.rectangles:
        low = 1 + rect.left * rect.height
        high = 1 + rect.right * rect.height
        if low.sign() <= 0 or high.sign() <= 0:
            raise InternalConsistencyError(f"1 + aH ≤ 0 на {rect.label}")
        product = product * high / low
    with mp.workprec(precision):
        value = mpmath.log(product.to_mpf(precision))
    return DomainMass(argument=product, value=value)


def normalizing_constant(q: Union[int, GroupIndex], alpha: AlphaLike, precision: int = 128) -> NormalizingConstant:
    """C_{q,α} в замкнутой форме: точный аргумент логарифма и тригонометрическая запись"""
    params = make_params(q, alpha, precision)
    group, regime = params.q, classify(q, params.alpha)
    B = _b(group)
    with mp.workprec(precision + 16):
        angle = mp.pi / group.q
        if group.is_even:
            argument = 1 / (B(group.p) - B(group.p - 1))
            formula = "1/log((1+cos π/q)/sin(π/q))"
            trig = (1 + mp.cos(angle)) / mp.sin(angle)
        elif regime in (Regime.ODD_HIGH, Regime.ODD_INV_LAMBDA):
            argument = (1 + params.right) * B(group.h + 1)
            formula = "1/log((1+2α cos π/q)/(2 sin(π/(2q))))"
            trig = (1 + 2 * params.alpha.to_mpf(precision + 16) * mp.cos(angle)) / (2 * mp.sin(angle / 2))
        else:
            argument = (1 + rho(group)) * B(group.h + 1)
            formula = "1/log((1+ρ)/√(2−λ))"
            trig = (1 + rho(group).to_mpf(precision + 16)) / (2 * mp.sin(angle / 2))
        value = 1 / mpmath.log(argument.to_mpf(precision + 16))
    with mp.workprec(precision):
        return NormalizingConstant(argument=argument, value=+value, formula=formula, trigonometric=+trig)


def constant_checks(domain: NatExtDomain, precision: int = 128) -> List[ChainCheck]:
    mass = domain_mass(domain, precision)
    constant = normalizing_constant(domain.q, domain.alpha, precision)
    checks = [_check("∏(1+bH)/(1+aH) = аргумент C_{q,α}", mass.argument, constant.argument, "=")]
    with mp.workprec(precision):
        trig_gap = abs(constant.trigonometric - constant.argument.to_mpf(precision))
        inverse_gap = abs(1 / constant.value - mass.value)
    tolerance = mpmath.mpf(2) ** (-(precision // 2))
    checks.append(ChainCheck("тригонометрическая форма C_{q,α}", "≈", None, bool(trig_gap < tolerance), float(trig_gap), 0.0))
    checks.append(ChainCheck("1/C_{q,α} = масса Ω_α", "≈", None, bool(inverse_gap < 1e-12), float(inverse_gap), 0.0))
    group = domain.q
    if group.is_even:
        checks.append(_check("B_{p+1} = B_{p−1}", b_n(group, group.p + 1), b_n(group, group.p - 1), "="))
    else:
        checks.append(_check("(2−λ)B_{h+1}² = 1", (2 - lambda_(group)) * b_n(group, group.h + 1) ** 2, 1, "="))
    return checks


def conjugacy_M(point: Tuple[Any, Any], q: Union[int, GroupIndex], direction: str = "forward") -> Tuple[Any, Any]:
    """
    𝓜(x, y) = (−y, −x) при x < 0 и (y, x) при x ≥ 0.

    direction="inverse" восстанавливает прообраз по образу (u, w): ветвь x < 0 даёт u ≤ 0 < w,
    ветвь x ≥ 0 даёт u, w ≥ 0. На луче u = 0, w > 0 прообразов два, (−w, 0) и (w, 0), и тогда
    поднимается DomainError.
    """
    group = group_index(q)
    if not group.is_even:
        raise ParameterError(f"𝓜 определено только для чётного q, q={group.q}")
    if direction == "forward":
        x, y = point
        if x < 0:
            return -y, -x
        return y, x
    if direction == "inverse":
        return _conjugacy_preimage(point)
    raise ParameterError(f"direction должно быть forward или inverse: {direction!r}")


def _conjugacy_preimage(point: Tuple[Any, Any]) -> Tuple[Any, Any]:
    u, w = point
    if u < 0:
        if not w > 0:
            raise DomainError(f"({u}, {w}) не лежит в образе 𝓜: при u < 0 нужно w > 0")
        return -w, -u
    if u == 0 and w > 0:
        raise DomainError(f"прообраз 𝓜 точки (0, {w}) неоднозначен: (−{w}, 0) или ({w}, 0)")
    if w < 0:
        raise DomainError(f"({u}, {w}) не лежит в образе 𝓜: нужно w ≥ 0")
    return w, u


def full_certificate(q: Union[int, GroupIndex], alpha: AlphaLike, precision: int = 128) -> Certificate:
    """Порядки, высоты, разбиение Ω_α и константы в одном сертификате"""
    params = make_params(q, alpha, precision)
    certificate = verify_ordering(params.q, params.alpha)
    certificate.extend(height_relations(params.q, params.alpha))
    try:
        domain = build_domain(params.q, params.alpha)
    except InternalConsistencyError as e:
        logger.error(f"Ошибка при построении Ω_α: {e}")
        certificate.checks.append(ChainCheck(f"построение Ω_α: {e}", "build", None, False))
        return certificate
    certificate.extend(domain_checks(domain))
    certificate.extend(constant_checks(domain, precision))
    certificate.checks.append(
        ChainCheck("r_0 > δ_1", ">", compare(params.right, params.delta(1)), params.r0_exceeds_delta1 or params.q.q == 3,
                   _float(params.right), _float(params.delta(1)))
    )
    return certificate
