"""Коэффициенты приближения Θ_n, отображение F, плотность d_α, константа Ленстры и статистические эксперименты"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Any, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from loguru import logger
from mpmath import mp

from config import settings
from services.algebra import AlgebraicNumber, compare, group_index
from services.errors import InternalConsistencyError, ParameterError, SingularInputError, UnsupportedError
from services.expansion import Params, convergents, expand, orbit
from services.natext import build_domain, make_params, normalizing_constant
from services.sampler import SAMPLER_BITS, OrbitSampler, SampleCollector, cell_mass, locate_cells, refine
from storage.models import (
    Experiment,
    ExperimentTable,
    GammaRegion,
    GroupIndex,
    LenstraResult,
    OrbitSample,
    Ordering,
    ThetaPair,
)

AlphaLike = Union[str, AlgebraicNumber]

# минимальное ожидаемое число точек в ячейке для z-оценок
MIN_EXPECTED = 5
NODE_CHUNK = 64


def theta_direct(x: Any, n: int, params: Params) -> mpmath.mpf:
    """Θ_n = S_n²|x − R_n/S_n|; для оборвавшейся орбиты 0"""
    if n < 0:
        raise ParameterError(f"n должно быть ≥ 0: {n}")
    if isinstance(x, (int, Fraction)):
        x = params.field(x)
    exact = isinstance(x, AlgebraicNumber)
    e = expand(x, n, params)
    if len(e) < n:
        return mp.mpf(0)
    pair = convergents(e, params, exact=exact)[n]
    prec = params.precision + 64
    with mp.workprec(prec):
        if exact:
            value = abs(pair.S * pair.S * x - pair.S * pair.R)
            return value.to_mpf(params.precision) if isinstance(value, AlgebraicNumber) else mp.mpf(value)
        s = pair.S.to_mpf(prec) if isinstance(pair.S, AlgebraicNumber) else mp.mpf(pair.S)
        r = pair.R.to_mpf(prec) if isinstance(pair.R, AlgebraicNumber) else mp.mpf(pair.R)
        value = abs(s) * abs(s * mp.mpf(x) - r)
    with mp.workprec(params.precision):
        return +value


def theta_from_orbit(t_n: Any, v_n: Any, eps_next: Any) -> Tuple[Any, Any]:
    """(Θ_n, Θ_{n−1}) = (ε_{n+1}t_n, v_n)/(1 + t_n v_n); работает и на массивах numpy"""
    denominator = 1 + t_n * v_n
    if np.any(np.asarray(denominator, dtype=float) <= 0):
        logger.error("1 + t_n v_n ≤ 0 для точки из Ω_α")
        raise InternalConsistencyError("1 + t_n v_n ≤ 0")
    return eps_next * t_n / denominator, v_n / denominator


def planar_orbit(x: Any, n: int, params: Params) -> List[OrbitSample]:
    """(t_k, v_k) = 𝒯_α^k(x, 0) по цифрам орбиты: v_k = S_{k−1}/S_k"""
    path = orbit(x, n, params)
    pairs = convergents(path.digits, params, exact=isinstance(x, AlgebraicNumber))
    samples: List[OrbitSample] = []
    with mp.workprec(params.precision + 64):
        for k, point in enumerate(path.points):
            if k >= len(pairs):
                break
            v = mp.mpf(0) if k == 0 else _to_mpf(pairs[k - 1].S, params) / _to_mpf(pairs[k].S, params)
            t = _to_mpf(point, params)
            eps_next = path.digits[k].epsilon if k < len(path.digits) else 0
            samples.append(OrbitSample(float(t), float(v), eps_next, k))
    return samples


def theta_sequence(x: Any, n: int, params: Params) -> List[ThetaPair]:
    """(Θ_{k−1}, Θ_k) для k = 1..n по планарной орбите"""
    pairs: List[ThetaPair] = []
    for sample in planar_orbit(x, n + 1, params)[1 : n + 1]:
        if sample.epsilon_next == 0 and sample.t != 0:
            break
        theta_cur, theta_prev = theta_from_orbit(sample.t, sample.v, sample.epsilon_next)
        pairs.append(ThetaPair(float(theta_prev), float(theta_cur), sample.epsilon_next))
    return pairs


def _to_mpf(value: Any, params: Params) -> mpmath.mpf:
    if isinstance(value, AlgebraicNumber):
        return value.to_mpf(params.precision + 64)
    return mp.mpf(value)


def f_map(t: Any, v: Any) -> Tuple[Any, Any]:
    """F(t, v) = (v/(1+tv), t/(1+tv))"""
    denominator = 1 + t * v
    if np.any(np.asarray(denominator == 0)):
        raise SingularInputError("tv = −1: F не определено")
    return v / denominator, t / denominator


def f_inverse(xi: Any, eta: Any) -> Tuple[Any, Any]:
    """F⁻¹(ξ, η) = (2η, 2ξ)/(1 + √(1 − 4ξη)) на ветви tv < 1"""
    discriminant = 1 - 4 * np.asarray(xi, dtype=float) * np.asarray(eta, dtype=float)
    if np.any(discriminant < 0):
        raise InternalConsistencyError("1 − 4ξη < 0: точка вне образа F")
    root = 1 + np.sqrt(discriminant)
    return 2 * eta / root, 2 * xi / root


@lru_cache(maxsize=32)
def _geometry(q: int, alpha: AlgebraicNumber) -> OrbitSampler:
    return OrbitSampler(q, alpha, walkers=1, burn_in=0)


def gamma_region(q: Union[int, GroupIndex], alpha: AlphaLike, sign: int) -> GammaRegion:
    if sign not in (1, -1):
        raise ParameterError(f"знак области Γ должен быть ±1: {sign}")
    params = make_params(group_index(q), alpha)
    return GammaRegion(sign, build_domain(params.q, params.alpha))


def gamma_contains(region: GammaRegion, xi: Any, eta: Any) -> np.ndarray:
    """(ξ, η) в свёрнутых координатах лежит в Γ^±, если F⁻¹(ξ, ±η) ∈ Ω_α и знак t совпадает (замыкание)"""
    sampler = _geometry(region.domain.q.q, region.domain.alpha)
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    signed = region.sign * eta
    discriminant = 1 - 4 * xi * signed
    valid = discriminant >= 0
    root = 1 + np.sqrt(np.where(valid, discriminant, 0.0))
    t, v = 2 * signed / root, 2 * xi / root
    same_side = (t >= 0) if region.sign > 0 else (t <= 0)
    return valid & same_side & sampler.contains(t, v)


def density_d_alpha(xi: Any, eta: Any, q: Union[int, GroupIndex], alpha: AlphaLike) -> Any:
    """d_α = d⁺ + d⁻, d^±(ξ, η) = C/√(1 ∓ 4ξη) на Γ^±, ξ, η ≥ 0"""
    constant = float(normalizing_constant(q, alpha).value)
    xi_a = np.asarray(xi, dtype=float)
    eta_a = np.asarray(eta, dtype=float)
    total = np.zeros(np.broadcast(xi_a, eta_a).shape)
    for sign in (1, -1):
        region = gamma_region(q, alpha, sign)
        inside = gamma_contains(region, xi_a, eta_a)
        radicand = 1 - sign * 4 * xi_a * eta_a
        if np.any(inside & (radicand < 0)):
            raise InternalConsistencyError("1 ∓ 4ξη < 0 внутри Γ")
        with np.errstate(divide="ignore", invalid="ignore"):
            part = constant / np.sqrt(radicand)
        total = total + np.where(inside, part, 0.0)
    return float(total) if total.ndim == 0 else total


def lenstra_constant(q: Union[int, GroupIndex], alpha: AlphaLike) -> AlgebraicNumber:
    """𝓛_α = min{λ/(λ+2), λ(2−αλ²)/(4−λ²)} для чётного q"""
    group = group_index(q)
    if not group.is_even:
        raise UnsupportedError(f"для нечётного q={group.q} замкнутой формы 𝓛_α нет")
    params = make_params(group, alpha)
    lam = params.lam
    first = lam / (lam + 2)
    second = lam * (2 - params.alpha * lam * lam) / (4 - lam * lam)
    return first if compare(first, second) is not Ordering.GT else second


def lenstra_theory(q: Union[int, GroupIndex], alpha: AlphaLike, c: float) -> float:
    """λC_{q,α}/c"""
    params = make_params(group_index(q), alpha)
    return float(params.lam) * float(normalizing_constant(q, alpha).value) / c


class LenstraCounter:
    def __init__(self, thresholds: Sequence[float]) -> None:
        self.thresholds = np.asarray(thresholds, dtype=float)
        self.hits = np.zeros(len(self.thresholds), dtype=np.int64)
        self.total = 0

    def update(self, t: np.ndarray, v: np.ndarray) -> None:
        theta = np.abs(t) / (1 + t * v)
        self.hits += (theta[None, :] < self.thresholds[:, None]).sum(axis=1)
        self.total += len(t)

    def merge(self, other: "LenstraCounter") -> None:
        self.hits += other.hits
        self.total += other.total


def _sampler(q: Union[int, GroupIndex], alpha: AlphaLike) -> OrbitSampler:
    return OrbitSampler(q, alpha, walkers=settings.walkers, burn_in=settings.burn_in)


def lenstra_experiment(
    q: Union[int, GroupIndex],
    alpha: AlphaLike,
    cs: Union[float, Sequence[float]],
    n: int,
    seed: int,
    shards: Optional[int] = None,
    threads: int = 1,
) -> List[LenstraResult]:
    """Частота Θ_n < 1/c по N точкам орбит против λC_{q,α}/c"""
    threshold = 1 / float(lenstra_constant(q, alpha))
    cs = [float(cs)] if isinstance(cs, (int, float)) else [float(c) for c in cs]
    for c in cs:
        if c <= 0:
            raise ParameterError(f"c должно быть > 0: {c}")
        if c < threshold - 1e-12:
            logger.warning(f"c = {c} < 1/𝓛_α = {threshold:.6f}: закон частот не гарантирован")
    counter = _sampler(q, alpha).run(n, seed, lambda: LenstraCounter([1 / c for c in cs]), shards or settings.shards, threads)
    results = [
        LenstraResult(c=c, n=counter.total, hits=int(hits), theory=lenstra_theory(q, alpha, c))
        for c, hits in zip(cs, counter.hits)
    ]
    for result in results:
        logger.info(f"Ленстра q={q}, α={alpha}, c={result.c:.6f}: {result.frequency:.6f} против {result.theory:.6f}")
    return results


def lenstra_slope(results: Sequence[LenstraResult]) -> Tuple[float, float]:
    """Наклон частоты по 1/c (подгонка прямой) и ожидаемое λC_{q,α}"""
    if len(results) < 2:
        raise ParameterError("для подгонки нужно хотя бы два значения c")
    x = np.array([1 / r.c for r in results])
    y = np.array([r.frequency for r in results])
    slope, _ = np.polyfit(x, y, 1)
    expected = results[0].theory * results[0].c
    return float(slope), float(expected)


def theta_bounds(sampler: OrbitSampler) -> Tuple[float, float]:
    """Габариты Γ в свёрнутых координатах: max Θ_{n−1} и max Θ_n"""
    xi_max = float(np.max(sampler.heights / (1 + sampler.lefts * sampler.heights)))
    negative = sampler.lefts < 0
    eta_left = -sampler.lefts[negative] / (1 + sampler.lefts[negative] * sampler.heights[negative])
    eta_max = max(sampler.right, float(eta_left.max()) if eta_left.size else 0.0)
    return xi_max, eta_max


class ThetaHistogram:
    def __init__(self, xi_edges: np.ndarray, eta_edges: np.ndarray, sampler: OrbitSampler) -> None:
        self.xi_edges = xi_edges
        self.eta_edges = eta_edges
        self.sampler = sampler
        self.counts = np.zeros((len(xi_edges) - 1, len(eta_edges) - 1), dtype=np.int64)
        self.total = 0
        self.outside = 0

    def update(self, t: np.ndarray, v: np.ndarray) -> None:
        theta_cur, theta_prev = theta_from_orbit(t, v, np.sign(t))
        counts, _, _ = np.histogram2d(theta_prev, theta_cur, bins=[self.xi_edges, self.eta_edges])
        self.counts += counts.astype(np.int64)
        self.total += len(t)
        # пара (Θ_{n−1}, Θ_n) должна вернуться в Ω_α через F⁻¹
        back_t, back_v = f_inverse(theta_prev, np.sign(t) * theta_cur)
        self.outside += int((~self.sampler.contains(back_t, back_v)).sum())

    def merge(self, other: "ThetaHistogram") -> None:
        self.counts += other.counts
        self.total += other.total
        self.outside += other.outside


def theta_distribution_experiment(
    q: Union[int, GroupIndex],
    alpha: AlphaLike,
    grid: int,
    n: int,
    seed: int,
    oversampling: Optional[int] = None,
    shards: Optional[int] = None,
    threads: int = 1,
) -> ExperimentTable:
    """Эмпирическая гистограмма (Θ_{n−1}, Θ_n) против ∫∫ d_α по ячейкам, z-оценки и χ²"""
    if grid < 1:
        raise ParameterError(f"размер сетки должен быть ≥ 1: {grid}")
    oversampling = oversampling or settings.oversampling
    sampler = _sampler(q, alpha)
    xi_max, eta_max = theta_bounds(sampler)
    xi_edges = np.linspace(0.0, xi_max, grid + 1)
    eta_edges = np.linspace(0.0, eta_max, grid + 1)
    histogram = sampler.run(n, seed, lambda: ThetaHistogram(xi_edges, eta_edges, sampler), shards or settings.shards, threads)
    empirical = histogram.counts / histogram.total
    constant = float(normalizing_constant(q, alpha).value)
    theoretical = theta_cell_masses(sampler, constant, xi_edges, eta_edges, grid * oversampling)

    rows = []
    for i in range(grid):
        for j in range(grid):
            rows.append([xi_edges[i], xi_edges[i + 1], eta_edges[j], eta_edges[j + 1], empirical[i, j], theoretical[i, j]])
    # z-оценки по ячейкам с ожидаемым числом точек ≥ MIN_EXPECTED
    used = theoretical * histogram.total >= MIN_EXPECTED
    sigma = np.sqrt(theoretical[used] * (1 - theoretical[used]) / histogram.total)
    z = (empirical[used] - theoretical[used]) / sigma
    summary = {
        "total_empirical": float(empirical.sum()),
        "total_theoretical": float(theoretical.sum()),
        "max_discrepancy": float(np.max(np.abs(empirical - theoretical))),
        "max_abs_z": float(np.max(np.abs(z))) if z.size else 0.0,
        "chi2_per_dof": float(np.mean(z * z)) if z.size else 0.0,
        "cells": int(used.sum()),
        "sparse_mass": float(empirical[~used].sum()),
        "outside_gamma": histogram.outside,
        # ∫∫ d_α по Γ^± средними точками против точных масс
        "density_gap": float(np.max(np.abs(density_integrals(q, alpha, xi_edges, eta_edges, oversampling) - theoretical))),
    }
    logger.info(
        f"Θ-гистограмма q={q}, α={alpha}: max|z| = {summary['max_abs_z']:.2f}, "
        f"χ²/dof = {summary['chi2_per_dof']:.3f} по {summary['cells']} ячейкам"
    )
    return ExperimentTable(
        experiment=Experiment.THETA2D.value,
        metadata=_metadata(q, alpha, n, seed, grid=grid, oversampling=oversampling),
        columns=["xi_lo", "xi_hi", "eta_lo", "eta_hi", "empirical", "theoretical"],
        rows=rows,
        summary=summary,
    )


def theta_cell_masses(
    sampler: OrbitSampler, constant: float, xi_edges: np.ndarray, eta_edges: np.ndarray, nodes: int
) -> np.ndarray:
    """ν_α-масса прообразов ячеек (ξ, η) в Ω_α, то есть ∫∫ d_α по ячейкам

    Для фиксированного t ячейке отвечает отрезок по v, и ∫ dv/(1+tv)² берётся точно;
    по t используется правило средних точек с nodes узлами на прямоугольник.
    """
    masses = np.zeros((len(xi_edges) - 1, len(eta_edges) - 1))
    for left, right, height in zip(sampler.lefts, sampler.rights, sampler.heights):
        width = (right - left) / nodes
        t_nodes = left + width * (np.arange(nodes) + 0.5)
        for chunk in np.array_split(t_nodes, max(1, nodes // NODE_CHUNK)):
            masses += width * _slice_masses(chunk, height, xi_edges, eta_edges)
    return constant * masses


def _slice_masses(t: np.ndarray, height: float, xi_edges: np.ndarray, eta_edges: np.ndarray) -> np.ndarray:
    t = t[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        # ξ = v/(1+tv) растёт по v
        xi_cut = np.where(1 - t * xi_edges > 0, xi_edges / (1 - t * xi_edges), np.inf)
        # η = |t|/(1+tv) убывает по v при t > 0 и растёт при t < 0
        eta_cut = (np.abs(t) / eta_edges - 1) / t
        positive = t > 0
        eta_lo = np.where(positive, eta_cut[:, 1:], eta_cut[:, :-1])
        eta_hi = np.where(positive, eta_cut[:, :-1], eta_cut[:, 1:])
        lo = np.maximum(np.maximum(xi_cut[:, :-1, None], eta_lo[:, None, :]), 0.0)
        hi = np.minimum(np.minimum(xi_cut[:, 1:, None], eta_hi[:, None, :]), height)
        tt = t[:, :, None]
        mass = np.where(hi > lo, (hi - lo) / ((1 + tt * lo) * (1 + tt * hi)), 0.0)
    return mass.sum(axis=0)


def density_integrals(q: Any, alpha: AlphaLike, xi_edges: np.ndarray, eta_edges: np.ndarray, oversampling: int) -> np.ndarray:
    """∫∫ d_α по ячейкам: средние точки подсетки oversampling × oversampling"""
    fine_xi = np.linspace(xi_edges[0], xi_edges[-1], (len(xi_edges) - 1) * oversampling + 1)
    fine_eta = np.linspace(eta_edges[0], eta_edges[-1], (len(eta_edges) - 1) * oversampling + 1)
    mid_xi = (fine_xi[:-1] + fine_xi[1:]) / 2
    mid_eta = (fine_eta[:-1] + fine_eta[1:]) / 2
    xi_grid, eta_grid = np.meshgrid(mid_xi, mid_eta, indexing="ij")
    area = (fine_xi[1] - fine_xi[0]) * (fine_eta[1] - fine_eta[0])
    values = density_d_alpha(xi_grid, eta_grid, q, alpha) * area
    shape = (len(xi_edges) - 1, oversampling, len(eta_edges) - 1, oversampling)
    return values.reshape(shape).sum(axis=(1, 3))


class CellCounter:
    def __init__(self, cells: Tuple[np.ndarray, ...]) -> None:
        self.cells = cells
        self.counts = np.zeros(len(cells[0]), dtype=np.int64)
        self.total = 0
        self.outside = 0

    def update(self, t: np.ndarray, v: np.ndarray) -> None:
        index = locate_cells(t, v, self.cells)
        self.outside += int((index < 0).sum())
        self.counts += np.bincount(index[index >= 0], minlength=len(self.counts))
        self.total += len(t)

    def merge(self, other: "CellCounter") -> None:
        self.counts += other.counts
        self.total += other.total
        self.outside += other.outside


def equidistribution(
    q: Union[int, GroupIndex],
    alpha: AlphaLike,
    n: int,
    seed: int,
    splits: int = 2,
    shards: Optional[int] = None,
    threads: int = 1,
) -> ExperimentTable:
    """Доли визитов орбиты в ячейки разбиения Ω_α против ν_α(ячейки), z-оценки"""
    sampler = _sampler(q, alpha)
    cells = refine(sampler, splits)
    counter = sampler.run(n, seed, lambda: CellCounter(cells), shards or settings.shards, threads)
    constant = float(normalizing_constant(q, alpha).value)
    expected = constant * cell_mass(*cells)
    empirical = counter.counts / counter.total
    sigma = np.sqrt(expected * (1 - expected) / counter.total)
    z = (empirical - expected) / sigma
    a, b, y0, y1 = cells
    rows = [[a[k], b[k], y0[k], y1[k], empirical[k], expected[k], z[k]] for k in range(len(a))]
    summary = {
        "max_abs_z": float(np.max(np.abs(z))),
        "sigma_band": settings.equidistribution_sigma,
        "outside": counter.outside,
        "total_expected": float(expected.sum()),
    }
    logger.info(f"Равнораспределение q={q}, α={alpha}: max|z| = {summary['max_abs_z']:.2f} по {len(a)} ячейкам")
    return ExperimentTable(
        experiment=Experiment.EQUIDISTRIBUTION.value,
        metadata=_metadata(q, alpha, n, seed, splits=splits),
        columns=["t_lo", "t_hi", "v_lo", "v_hi", "empirical", "theoretical", "z"],
        rows=rows,
        summary=summary,
    )


def measure_preservation(q: Union[int, GroupIndex], alpha: AlphaLike, n: int, seed: int, splits: int = 2) -> np.ndarray:
    """z-оценки ν(𝒯⁻¹R) − ν(R) по ячейкам R; выборка равномерна в Ω_α с весом плотности"""
    sampler = _sampler(q, alpha)
    rng = np.random.default_rng(seed)
    t, v = sampler.uniform_points(rng, n)
    constant = float(normalizing_constant(q, alpha).value)
    area = float(((sampler.rights - sampler.lefts) * sampler.heights).sum())
    weight = constant * area / (1 + t * v) ** 2
    image_t, image_v = sampler.step(t, v)
    cells = refine(sampler, splits)
    before = locate_cells(t, v, cells)
    after = locate_cells(image_t, image_v, cells)
    scores = np.zeros(len(cells[0]))
    for k in range(len(scores)):
        difference = weight * ((after == k).astype(float) - (before == k).astype(float))
        spread = difference.std(ddof=1) / np.sqrt(n)
        scores[k] = difference.mean() / spread if spread > 0 else 0.0
    return scores


def image_membership(q: Union[int, GroupIndex], alpha: AlphaLike, n: int, seed: int) -> float:
    """Доля образов 𝒯_α(p), лежащих в Ω_α, для равномерных p ∈ Ω_α"""
    sampler = _sampler(q, alpha)
    t, v = sampler.uniform_points(np.random.default_rng(seed), n)
    image_t, image_v = sampler.step(t, v)
    return float(sampler.contains(image_t, image_v).mean())


def _conjugate(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    negative = x < 0
    return np.where(negative, -y, y), np.where(negative, -x, x)


def _boundary_distance(sampler: OrbitSampler, t: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        value = 1.0 / (np.abs(t) * sampler.lam) + 1.0 - sampler.alpha
    return np.abs(value - np.round(value))


def conjugacy_discrepancy(q: Union[int, GroupIndex], n: int, seed: int, margin: float = 1e-9) -> Tuple[float, int]:
    """max |𝒯_{1/λ}(p) − 𝓜⁻¹𝒯_{1/2}⁻¹𝓜(p)| по равномерным p ∈ Ω_{1/λ}, делённое на max(1, 1/|t|);
    возвращает также число точек, пропущенных у границ цилиндров
    """
    group = group_index(q)
    if not group.is_even:
        raise ParameterError(f"𝓜 определено только для чётного q, q={group.q}")
    source = _sampler(group, "1/lambda")
    target = _sampler(group, "1/2")
    x, y = source.uniform_points(np.random.default_rng(seed), n)
    direct_t, direct_v = source.step(x, y)
    u, w = _conjugate(x, y)
    back_u, back_w = target.inverse_step(u, w)
    composed_t, composed_v = _conjugate(back_u, back_w)
    stable = (_boundary_distance(source, x) > margin) & np.isfinite(composed_t) & (x != 0)
    stable &= _boundary_distance(target, np.where(np.isfinite(back_u), back_u, 1.0)) > margin
    # ε/t − dλ теряет log2(1/|t|) бит при малых |t|
    scale = np.maximum(1.0, 1.0 / np.maximum(np.abs(x), 1e-300))
    gap = np.maximum(np.abs(direct_t - composed_t), np.abs(direct_v - composed_v)) / scale
    skipped = int((~stable).sum())
    worst = float(gap[stable].max()) if stable.any() else 0.0
    logger.info(f"Сопряжение 𝓜 q={group.q}: max расхождение {worst:.3e}, пропущено {skipped}")
    return worst, skipped


def orbit_containment(q: Union[int, GroupIndex], alpha: AlphaLike, steps: int, seed: int, walkers: int = 64) -> Tuple[float, float]:
    """Доля точек 𝒯_α^k(x, 0), k ≤ steps, вне Ω_α и max v_k"""
    sampler = OrbitSampler(q, alpha, walkers=walkers, burn_in=0)
    collector = sampler.run(steps * walkers, seed, SampleCollector, shards=1)
    t, v = collector.arrays()
    return float((~sampler.contains(t, v)).mean()), float(v.max())


def _metadata(q: Any, alpha: AlphaLike, n: int, seed: int, **extra: Any) -> dict:
    return {
        "q": group_index(q).q,
        "alpha": str(alpha),
        "N": n,
        "seed": seed,
        "precision": SAMPLER_BITS,
        **extra,
    }


def lenstra_table(q: Union[int, GroupIndex], alpha: AlphaLike, results: Sequence[LenstraResult], seed: int) -> ExperimentTable:
    rows = [[r.c, r.frequency, r.theory, r.stderr, r.z] for r in results]
    summary = {"max_abs_z": float(max(abs(r.z) for r in results))}
    if len(results) >= 2:
        slope, expected = lenstra_slope(results)
        summary.update(slope=slope, expected_slope=expected)
    return ExperimentTable(
        experiment=Experiment.LENSTRA.value,
        metadata=_metadata(q, alpha, results[0].n, seed, lenstra_constant=float(lenstra_constant(q, alpha))),
        columns=["c", "empirical", "theoretical", "stderr", "z"],
        rows=rows,
        summary=summary,
    )
