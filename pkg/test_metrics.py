"""
Тесты коэффициентов Θ_n, отображения F, плотности d_α и статистических экспериментов
"""

import mpmath
import numpy as np
import pytest

from services.errors import ParameterError, SingularInputError, UnsupportedError
from services.expansion import Params
from services.metrics import (
    ThetaHistogram,
    conjugacy_discrepancy,
    density_d_alpha,
    density_integrals,
    equidistribution,
    f_inverse,
    f_map,
    gamma_region,
    image_membership,
    lenstra_constant,
    lenstra_experiment,
    lenstra_slope,
    lenstra_table,
    lenstra_theory,
    measure_preservation,
    orbit_containment,
    theta_bounds,
    theta_cell_masses,
    theta_direct,
    theta_distribution_experiment,
    theta_sequence,
)
from services.natext import build_domain, normalizing_constant
from services.sampler import OrbitSampler
from storage.grid import load_grid_from_json

LENSTRA_Q4 = 0.66460


def test_theta_direct_matches_orbit():
    params = Params.from_tokens(6, "0.53")
    x = mpmath.mpf("0.3141592653589793")
    pairs = theta_sequence(x, 12, params)
    assert len(pairs) == 12
    assert pairs[0].theta_prev == pytest.approx(float(abs(x)), rel=1e-12)
    for k, pair in enumerate(pairs, start=1):
        assert pair.theta_cur == pytest.approx(float(theta_direct(x, k, params)), rel=1e-9)
        if k > 1:
            assert pair.theta_prev == pytest.approx(pairs[k - 2].theta_cur, rel=1e-12)


@pytest.mark.parametrize("q, alpha", [(4, "1/2"), (5, "0.56"), (8, "1/lambda")])
def test_theta_direct_random_points(q, alpha):
    params = Params.from_tokens(q, alpha)
    rng = np.random.default_rng(17)
    for x in rng.uniform(float(params.left), float(params.right), 40):
        n = int(rng.integers(1, 11))
        point = mpmath.mpf(float(x))
        pairs = theta_sequence(point, n, params)
        assert pairs[-1].theta_cur == pytest.approx(float(theta_direct(point, n, params)), rel=1e-10)


def test_theta_of_terminated_orbit():
    params = Params.from_tokens(4, "1/2")
    assert theta_direct(params.left, 3, params) == 0
    with pytest.raises(ParameterError):
        theta_direct(params.left, -1, params)


def test_f_inverse_undoes_f():
    sampler = OrbitSampler(6, "0.53", walkers=1, burn_in=0)
    t, v = sampler.uniform_points(np.random.default_rng(5), 1000)
    back_t, back_v = f_inverse(*f_map(t, v))
    assert np.max(np.abs(back_t - t)) < 1e-12
    assert np.max(np.abs(back_v - v)) < 1e-12


def test_f_map_singular():
    with pytest.raises(SingularInputError):
        f_map(1.0, -1.0)


def test_gamma_region_sign():
    with pytest.raises(ParameterError):
        gamma_region(4, "1/2", 0)


def test_density_near_origin():
    # у начала координат обе области Γ^± дают по C
    constant = float(normalizing_constant(4, "1/2").value)
    assert density_d_alpha(1e-3, 1e-3, 4, "1/2") == pytest.approx(2 * constant, rel=1e-5)
    values = density_d_alpha(np.linspace(0, 1, 11), np.linspace(0, 1, 11), 6, "0.53")
    assert np.all(values >= 0)


def test_lenstra_constant():
    assert float(lenstra_constant(4, "1/2")) == pytest.approx(0.414214, abs=1e-6)
    with pytest.raises(UnsupportedError):
        lenstra_constant(5, "0.56")


def test_lenstra_theory_q4():
    c = 1 / float(lenstra_constant(4, "1/2"))
    assert lenstra_theory(4, "1/2", c) == pytest.approx(LENSTRA_Q4, abs=1e-5)


def test_lenstra_experiment_q4():
    c = 1 / float(lenstra_constant(4, "1/2"))
    (result,) = lenstra_experiment(4, "1/2", [c], n=200_000, seed=11)
    assert result.n == 200_000
    assert abs(result.frequency - LENSTRA_Q4) < 0.006


def test_lenstra_slope_and_table():
    base = 1 / float(lenstra_constant(6, "0.53"))
    results = lenstra_experiment(6, "0.53", [base, 2 * base, 5 * base], n=200_000, seed=12)
    slope, expected = lenstra_slope(results)
    assert slope == pytest.approx(expected, rel=0.015)
    for result in results:
        assert abs(result.frequency - result.theory) < 0.006
    table = lenstra_table(6, "0.53", results, seed=12)
    assert len(table.rows) == 3
    assert "slope" in table.summary
    with pytest.raises(ParameterError):
        lenstra_slope(results[:1])


def test_lenstra_rejects_bad_c():
    with pytest.raises(ParameterError):
        lenstra_experiment(4, "1/2", [0.0], n=100, seed=1)


def test_runs_do_not_depend_on_threads():
    c = 1 / float(lenstra_constant(4, "0.6"))
    single = lenstra_experiment(4, "0.6", [c], n=20_000, seed=3, shards=4, threads=1)
    pooled = lenstra_experiment(4, "0.6", [c], n=20_000, seed=3, shards=4, threads=4)
    assert [r.hits for r in single] == [r.hits for r in pooled]


def test_theta_distribution():
    table = theta_distribution_experiment(6, "0.53", grid=20, n=200_000, seed=4, oversampling=4)
    assert len(table.rows) == 400
    assert table.summary["total_empirical"] == pytest.approx(1.0, abs=1e-12)
    assert table.summary["total_theoretical"] == pytest.approx(1.0, abs=1e-3)
    assert table.summary["cells"] > 200
    assert table.summary["max_abs_z"] < 5.5
    assert table.summary["chi2_per_dof"] < 1.5
    assert table.summary["sparse_mass"] < 0.01
    assert table.summary["density_gap"] < 5e-3
    assert table.summary["outside_gamma"] <= 10


def test_theta_distribution_rejects_wrong_constant():
    # при неверной нормировке z-оценки выходят далеко за полосу
    sampler = OrbitSampler(4, "1/2", walkers=256, burn_in=200)
    xi_max, eta_max = theta_bounds(sampler)
    xi_edges, eta_edges = np.linspace(0, xi_max, 11), np.linspace(0, eta_max, 11)
    histogram = sampler.run(100_000, 3, lambda: ThetaHistogram(xi_edges, eta_edges, sampler), shards=4)
    empirical = histogram.counts / histogram.total
    constant = float(normalizing_constant(4, "1/2").value)
    right = theta_cell_masses(sampler, constant, xi_edges, eta_edges, 200)
    wrong = theta_cell_masses(sampler, 1.25 * constant, xi_edges, eta_edges, 200)
    used = right > 1e-3

    def worst(expected):
        sigma = np.sqrt(expected[used] * (1 - expected[used]) / histogram.total)
        return np.max(np.abs(empirical[used] - expected[used]) / sigma)

    assert worst(right) < 5.5
    assert worst(wrong) > 8


@pytest.mark.parametrize("q, alpha", [(4, "1/2"), (6, "0.53"), (5, "0.5038"), (5, "0.56")])
def test_theta_cell_masses_normalised(q, alpha):
    sampler = OrbitSampler(q, alpha, walkers=1, burn_in=0)
    xi_max, eta_max = theta_bounds(sampler)
    constant = float(normalizing_constant(q, alpha).value)
    masses = theta_cell_masses(sampler, constant, np.linspace(0, xi_max, 8), np.linspace(0, eta_max, 6), 400)
    assert masses.min() >= 0
    assert masses.sum() == pytest.approx(1.0, abs=1e-6)
    whole = theta_cell_masses(sampler, constant, np.array([0.0, xi_max]), np.array([0.0, eta_max]), 400)
    assert whole[0, 0] == pytest.approx(1.0, abs=1e-6)


def test_density_integrals_match_cell_masses():
    sampler = OrbitSampler(6, "0.53", walkers=1, burn_in=0)
    xi_max, eta_max = theta_bounds(sampler)
    xi_edges, eta_edges = np.linspace(0, xi_max, 11), np.linspace(0, eta_max, 11)
    constant = float(normalizing_constant(6, "0.53").value)
    exact = theta_cell_masses(sampler, constant, xi_edges, eta_edges, 400)
    numeric = density_integrals(6, "0.53", xi_edges, eta_edges, 16)
    assert np.max(np.abs(numeric - exact)) < 2e-3
    assert numeric.sum() == pytest.approx(1.0, abs=5e-3)


def test_equidistribution():
    table = equidistribution(6, "0.53", n=200_000, seed=9)
    assert table.summary["max_abs_z"] < 5
    assert table.summary["outside"] == 0
    assert table.summary["total_expected"] == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("q, alpha", [(6, "0.53"), (5, "0.56"), (4, "1/lambda")])
def test_measure_preservation(q, alpha):
    scores = measure_preservation(q, alpha, n=100_000, seed=21)
    assert np.max(np.abs(scores)) < 5


@pytest.mark.parametrize("q, alpha", [(6, "0.53"), (5, "0.5038"), (5, "rho/lambda"), (7, "1/2")])
def test_image_membership(q, alpha):
    assert image_membership(q, alpha, n=20_000, seed=2) > 0.999


@pytest.mark.parametrize("q", [4, 6, 8])
def test_conjugacy_discrepancy(q):
    worst, skipped = conjugacy_discrepancy(q, n=10_000, seed=8)
    assert worst < 1e-12
    assert skipped < 100


def test_conjugacy_discrepancy_odd():
    with pytest.raises(ParameterError):
        conjugacy_discrepancy(5, n=10, seed=1)


def test_orbit_containment():
    outside, v_max = orbit_containment(6, "0.53", steps=200, seed=6)
    domain = build_domain(6, "0.53")
    assert outside == 0
    assert v_max <= max(float(rect.height) for rect in domain.rectangles) + 1e-9


@pytest.mark.slow
@pytest.mark.parametrize("q, alpha", [(4, "1/2"), (6, "0.53"), (8, "1/lambda")])
def test_lenstra_experiment_large(q, alpha):
    c = 1 / float(lenstra_constant(q, alpha))
    (result,) = lenstra_experiment(q, alpha, [c], n=10**6, seed=13)
    assert abs(result.frequency - result.theory) < 0.003


@pytest.mark.slow
@pytest.mark.parametrize("q", [4, 6])
@pytest.mark.parametrize("alpha", ["1/2", "0.53", "1/lambda"])
def test_lenstra_frequencies_and_slope(q, alpha):
    base = 1 / float(lenstra_constant(q, alpha))
    results = lenstra_experiment(q, alpha, [base, 2 * base, 5 * base], n=10**6, seed=14)
    for result in results:
        assert abs(result.frequency - result.theory) < 0.005
    slope, expected = lenstra_slope(results)
    assert slope == pytest.approx(expected, rel=0.01)


@pytest.mark.slow
@pytest.mark.parametrize("q, alpha", [(6, "0.53"), (5, "0.56"), (5, "0.5038")])
def test_equidistribution_per_rectangle(q, alpha):
    table = equidistribution(q, alpha, n=10**7, seed=10, splits=1)
    assert len(table.rows) == len(build_domain(q, alpha).rectangles)
    assert table.summary["max_abs_z"] < 4
    assert table.summary["outside"] == 0


@pytest.mark.slow
@pytest.mark.parametrize("q, alpha", load_grid_from_json())
def test_image_membership_grid(q, alpha):
    assert image_membership(q, alpha, n=10**5, seed=23) > 0.999
