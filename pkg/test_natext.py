"""
Тесты точных теорем о порядке орбит концов, высот, Ω_α и констант
"""

from fractions import Fraction

import mpmath
import numpy as np
import pytest

from services.algebra import lambda_, number_field, rho
from services.errors import DomainError, OrbitTerminated, ParameterError
from services.jigsaw import ExactSorter, verify_conjugacy_domains, verify_tiling
from services.natext import (
    build_domain,
    classify,
    conjugacy_M,
    domain_contains,
    domain_mass,
    endpoint_orbits,
    full_certificate,
    heights,
    height_relations,
    normalizing_constant,
    two_dim_inverse,
    two_dim_map,
    verify_ordering,
)
from services.sampler import OrbitSampler
from storage.grid import load_grid_from_json
from storage.models import Regime

REPRESENTATIVES = [
    (6, "0.53", Regime.EVEN_INTERIOR),
    (4, "1/2", Regime.EVEN_HALF),
    (4, "1/lambda", Regime.EVEN_INV_LAMBDA),
    (5, "0.5038", Regime.ODD_LOW),
    (5, "rho/lambda", Regime.ODD_RHO),
    (5, "0.56", Regime.ODD_HIGH),
    (5, "1/2", Regime.ODD_HALF),
    (5, "1/lambda", Regime.ODD_INV_LAMBDA),
]


@pytest.mark.parametrize("q, alpha, regime", REPRESENTATIVES)
def test_classify(q, alpha, regime):
    assert classify(q, alpha) is regime


@pytest.mark.parametrize("q, alpha, regime", REPRESENTATIVES)
def test_full_certificate_passes(q, alpha, regime):
    certificate = full_certificate(q, alpha)
    assert certificate.regime is regime
    assert certificate.ok, [check.label for check in certificate.failures]


@pytest.mark.parametrize("q, alpha, digits", [
    (6, "0.53", {"d_p(l0)": 2, "d_p(r0)": 3}),
    (5, "0.56", {"d_h+1(l0)": 3, "d_h+2(r0)": 2}),
    (5, "0.5038", {"d_2h+2(l0)": 3, "d_2h+2(r0)": 4}),
])
def test_critical_digits(q, alpha, digits):
    assert verify_ordering(q, alpha).critical_digits == digits


def test_even_interior_merge():
    orbits = endpoint_orbits(6, "0.53")
    assert orbits.ell[3] == orbits.r[3]
    assert orbits.ell[0] < orbits.r[1] < orbits.ell[1] < orbits.r[2] < orbits.ell[2]


@pytest.mark.parametrize("q", [3, 5, 7])
def test_odd_high_merge(q):
    h = (q - 3) // 2
    alpha = {3: "0.75", 5: "0.56", 7: "0.53"}[q]
    orbits = endpoint_orbits(q, alpha)
    assert orbits.ell[h + 1] == orbits.r[h + 2]


@pytest.mark.parametrize("q, alpha", [(4, "0.6"), (6, "1/2"), (8, "0.53"), (10, "1/lambda")])
def test_even_heights(q, alpha):
    p = q // 2
    H = heights(q, alpha)
    assert len(H) == 2 * p - 1
    assert H[2 * p - 2] == 1
    assert H[2 * p - 3] == lambda_(q) / 2
    assert all(check.ok for check in height_relations(q, alpha))


@pytest.mark.parametrize("q", [5, 7, 9])
def test_odd_heights(q):
    h = (q - 3) // 2
    high = heights(q, "1/lambda")
    assert high[2 * h + 1] == 1
    low = heights(q, "1/2")
    assert low[4 * h + 2] == rho(q)


def test_height_relations_skip_for_q3():
    checks = height_relations(3, "0.55")
    assert all(check.ok for check in checks)
    assert any(check.skipped for check in checks)


@pytest.mark.parametrize("q, alpha, count", [(6, "0.53", 5), (5, "0.5038", 7)])
def test_rectangle_counts(q, alpha, count):
    domain = build_domain(q, alpha)
    assert len(domain.rectangles) == count
    assert domain.dropped == 0


def test_degenerate_intervals_dropped():
    domain = build_domain(5, "1/2")
    assert domain.dropped > 0
    assert len(domain.rectangles) + domain.dropped == 7
    for rect, following in zip(domain.rectangles, domain.rectangles[1:]):
        assert rect.left < rect.right == following.left


def test_domain_invariants():
    domain = build_domain(6, "0.53")
    params_right = Fraction(53, 100) * lambda_(6)
    assert domain.right == params_right
    assert domain.right - domain.left == lambda_(6)
    assert all(rect.height > 0 for rect in domain.rectangles)


def test_half_domain_q4():
    domain = build_domain(4, "1/2")
    lam = lambda_(4)
    assert domain.rectangles[-1].left == 0
    assert domain.rectangles[-1].height == 1
    assert domain.left == -lam / 2


def test_domain_mass_q4():
    domain = build_domain(4, "1/2")
    mass = domain_mass(domain)
    assert float(mass.value) == pytest.approx(0.881374, abs=1e-6)
    assert mass.argument == 1 + lambda_(4)


@pytest.mark.parametrize("q, alpha", [(4, "1/2"), (4, "1/lambda"), (6, "0.53"), (5, "0.56"), (5, "0.5038"), (7, "rho/lambda")])
def test_constant_matches_mass(q, alpha):
    constant = normalizing_constant(q, alpha)
    mass = domain_mass(build_domain(q, alpha))
    assert mass.argument == constant.argument
    assert abs(1 / constant.value - mass.value) < 1e-12
    assert abs(constant.trigonometric - constant.argument.to_mpf(128)) < mpmath.mpf(2) ** -60


def test_constant_values():
    assert float(normalizing_constant(4, "1/2").value) == pytest.approx(1.134593, abs=1e-6)
    # для q = 3: 1/log(1+α) выше порога и 1/log((√5+1)/2) ниже
    assert float(normalizing_constant(3, "0.75").value) == pytest.approx(float(1 / mpmath.log(1.75)), abs=1e-12)
    golden = (5 ** 0.5 + 1) / 2
    assert float(normalizing_constant(3, "0.55").value) == pytest.approx(float(1 / mpmath.log(golden)), abs=1e-12)


def test_two_dim_map_roundtrip():
    field = number_field(6)
    point = (field(Fraction(1, 3)), field(Fraction(1, 10)))
    image = two_dim_map(point, 6, "0.53")
    domain = build_domain(6, "0.53")
    assert domain_contains(domain, *image)
    assert two_dim_inverse(image, 6, "0.53") == point


def test_two_dim_map_float_matches_exact():
    exact = two_dim_map((Fraction(1, 3), Fraction(1, 10)), 5, "0.56")
    approx = two_dim_map((mpmath.mpf(1) / 3, mpmath.mpf("0.1")), 5, "0.56")
    assert abs(exact[0].to_mpf(128) - approx[0]) < 1e-14
    assert abs(exact[1].to_mpf(128) - approx[1]) < 1e-14


def test_two_dim_map_errors():
    with pytest.raises(OrbitTerminated):
        two_dim_map((0, Fraction(1, 10)), 6, "0.53")
    with pytest.raises(DomainError):
        two_dim_inverse((Fraction(1, 10), 0), 6, "0.53")


def test_conjugacy_M():
    field = number_field(4)
    x, y = field(Fraction(-1, 2)), field(Fraction(1, 5))
    assert conjugacy_M((x, y), 4) == (-y, -x)
    assert conjugacy_M(conjugacy_M((x, y), 4), 4, "inverse") == (x, y)
    with pytest.raises(ParameterError):
        conjugacy_M((x, y), 5)
    with pytest.raises(ParameterError):
        conjugacy_M((x, y), 4, "sideways")


def test_conjugacy_M_inverse_branches():
    field = number_field(6)
    zero, a, b = field(0), field(Fraction(1, 3)), field(Fraction(1, 7))
    for point in [(-a, b), (a, b), (zero, b), (zero, zero)]:
        assert conjugacy_M(conjugacy_M(point, 6), 6, "inverse") == point
    # на луче u = 0 у точки два прообраза: (−a, 0) и (a, 0)
    assert conjugacy_M((-a, zero), 6) == conjugacy_M((a, zero), 6)
    with pytest.raises(DomainError):
        conjugacy_M((zero, a), 6, "inverse")
    with pytest.raises(DomainError):
        conjugacy_M((-a, -b), 6, "inverse")
    with pytest.raises(DomainError):
        conjugacy_M((a, -b), 6, "inverse")


def test_conjugacy_identity_exact_q4():
    # 𝒯_{1/λ}(p) = 𝓜⁻¹ 𝒯_{1/2}⁻¹ 𝓜(p)
    field = number_field(4)
    point = (field(Fraction(1, 2)), field(Fraction(1, 5)))
    direct = two_dim_map(point, 4, "1/lambda")
    moved = conjugacy_M(point, 4)
    composed = conjugacy_M(two_dim_inverse(moved, 4, "1/2"), 4, "inverse")
    assert composed == direct


@pytest.mark.parametrize("q", [4, 6, 8])
def test_conjugacy_domains(q):
    report = verify_conjugacy_domains(q)
    assert report.ok, report.defects


@pytest.mark.parametrize("q, alpha, regime", REPRESENTATIVES)
def test_tiling(q, alpha, regime):
    report = verify_tiling(q, alpha)
    assert report.ok, report.defects
    assert report.tail_digit is not None and report.tail_digit >= 2


def test_exact_sorter():
    field = number_field(6)
    sorter = ExactSorter()
    values = [field.lambda_ / 2, field(Fraction(1, 3)), field.lambda_ / 2, -field.lambda_]
    assert sorter.unique_sorted(values) == [-field.lambda_, field(Fraction(1, 3)), field.lambda_ / 2]


def test_grid_loader():
    grid = load_grid_from_json()
    assert (6, "0.53") in grid
    assert {q for q, _ in grid} == set(range(3, 13))


@pytest.mark.slow
def test_full_grid():
    failures = []
    for q, alpha in load_grid_from_json():
        certificate = full_certificate(q, alpha)
        if not certificate.ok:
            failures.append((q, alpha, [check.label for check in certificate.failures]))
    assert failures == []


def test_half_domain_q4_drops_empty_interval():
    # r_1 = ℓ_1 = 0: J_2 пуст
    domain = build_domain(4, "1/2")
    assert len(domain.rectangles) == 2
    assert domain.dropped == 1


@pytest.mark.parametrize("q", [4, 5, 6, 12])
def test_half_alpha_r1_equals_phi1(q):
    # при α = 1/2 отображение T_α чётно, и r_1 совпадает с φ_1
    certificate = full_certificate(q, "1/2")
    assert certificate.ok, [check.label for check in certificate.failures]
    labels = {check.label for check in certificate.checks}
    assert "r_1 = φ_1" in labels
    assert "r_1 < φ_1" not in labels


@pytest.mark.parametrize("q, alpha", [(6, "0.53"), (5, "0.56"), (7, "0.51")])
def test_r1_strictly_below_phi1_off_half(q, alpha):
    labels = {check.label for check in verify_ordering(q, alpha).checks}
    assert "r_1 < φ_1" in labels


ODD_LOW_NEAR_TOP = [
    (5, "0.508"),
    (5, "0.511"),
    (7, "0.502"),
    (9, "0.5006"),
    (9, "0.5008"),
    (11, "0.5003"),
    (11, "0.5004"),
]


@pytest.mark.parametrize("q, alpha", ODD_LOW_NEAR_TOP)
def test_odd_low_below_rho_over_lambda(q, alpha):
    certificate = full_certificate(q, alpha)
    assert certificate.regime is Regime.ODD_LOW
    assert certificate.ok, [check.label for check in certificate.failures]
    h = (q - 3) // 2
    labels = {check.label for check in certificate.checks}
    assert f"ℓ_{h} < −δ_2" in labels
    assert any(label.startswith(f"r_{2 * h + 1} < −δ_") for label in labels)


def test_odd_low_cylinder_of_r3_moves_with_alpha():
    # r_3 при q = 5 уходит из цилиндра цифры 4 в цилиндр цифры 2
    assert verify_ordering(5, "0.5038").critical_digits["d_2h+2(r0)"] == 4
    near_top = verify_ordering(5, "0.508")
    assert near_top.critical_digits["d_2h+2(r0)"] == 2
    labels = {check.label for check in near_top.checks}
    assert {"r_3 < −δ_2", "−δ_1 ≤ r_3"} <= labels


@pytest.mark.parametrize("q, alpha", [(6, "0.53"), (5, "0.5038")])
def test_two_dim_map_injective_exact(q, alpha):
    domain = build_domain(q, alpha)
    points = []
    for rect in domain.rectangles:
        for i in (1, 3, 5):
            for j in (1, 2):
                t = rect.left + (rect.right - rect.left) * Fraction(i, 7)
                points.append((t, rect.height * Fraction(j, 3)))
    images = [two_dim_map(point, q, alpha) for point in points]
    for point, image in zip(points, images):
        assert domain_contains(domain, *image)
        assert two_dim_inverse(image, q, alpha) == point
    assert len({(str(t), str(v)) for t, v in images}) == len(points)


@pytest.mark.parametrize("q, alpha", [(4, "1/2"), (6, "0.53"), (5, "0.5038"), (5, "0.56"), (7, "rho/lambda")])
def test_sampler_step_injective(q, alpha):
    sampler = OrbitSampler(q, alpha, walkers=1, burn_in=0)
    t, v = sampler.uniform_points(np.random.default_rng(31), 20_000)
    image_t, image_v = sampler.step(t, v)
    back_t, back_v = sampler.inverse_step(image_t, image_v)
    recovered = (np.abs(back_t - t) < 1e-9) & (np.abs(back_v - v) < 1e-9)
    assert recovered.mean() > 0.9995
    pairs = np.round(np.column_stack([image_t, image_v]), 12)
    assert len(np.unique(pairs, axis=0)) == len(t)
