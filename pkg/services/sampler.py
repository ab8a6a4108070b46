from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Protocol, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from services.algebra import AlgebraicNumber
from services.errors import ParameterError
from services.natext import build_domain, make_params
from storage.models import GroupIndex, NatExtDomain

# допуск на принадлежность Ω_α для float64
MEMBERSHIP_TOLERANCE = 1e-9
# траектории считаются в float64
SAMPLER_BITS = np.finfo(np.float64).nmant + 1


class Accumulator(Protocol):
    def update(self, t: np.ndarray, v: np.ndarray) -> None: ...

    def merge(self, other: "Accumulator") -> None: ...


class OrbitSampler:
    """Пачка float64-траекторий 𝒯_α, стартующих из (x, 0) с равномерным x"""

    def __init__(
        self,
        q: Union[int, GroupIndex],
        alpha: Union[str, AlgebraicNumber],
        walkers: int = 1024,
        burn_in: int = 1000,
    ) -> None:
        if walkers < 1:
            raise ParameterError(f"число траекторий должно быть ≥ 1: {walkers}")
        if burn_in < 0:
            raise ParameterError(f"burn-in должен быть ≥ 0: {burn_in}")
        self.params = make_params(q, alpha)
        self.domain: NatExtDomain = build_domain(self.params.q, self.params.alpha)
        self.walkers = walkers
        self.burn_in = burn_in
        self.lam = float(self.params.lam)
        self.alpha = float(self.params.alpha)
        self.left = float(self.params.left)
        self.right = float(self.params.right)
        self.lefts = np.array([float(rect.left) for rect in self.domain.rectangles])
        self.rights = np.array([float(rect.right) for rect in self.domain.rectangles])
        self.heights = np.array([float(rect.height) for rect in self.domain.rectangles])

    def rectangle_index(self, t: np.ndarray) -> np.ndarray:
        """Номер прямоугольника, содержащего t, или -1"""
        index = np.searchsorted(self.lefts, t, side="right") - 1
        inside = (index >= 0) & (t < self.right)
        return np.where(inside, index, -1)

    def contains(self, t: np.ndarray, v: np.ndarray, tolerance: float = MEMBERSHIP_TOLERANCE) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        v = np.asarray(v, dtype=float)
        index = self.rectangle_index(np.clip(t, self.left, np.nextafter(self.right, self.left)))
        within_x = (t >= self.left - tolerance) & (t < self.right + tolerance)
        height = self.heights[np.maximum(index, 0)]
        return within_x & (index >= 0) & (v >= -tolerance) & (v <= height + tolerance)

    def digits(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(ε, d) для массива точек; для t = 0 d = 0"""
        eps = np.sign(t)
        with np.errstate(divide="ignore"):
            d = np.floor(1.0 / (np.abs(t) * self.lam) + 1.0 - self.alpha)
        d = np.where(np.isfinite(d), np.maximum(d, 1.0), 0.0)
        return eps, d

    def step(self, t: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Один шаг 𝒯_α; точки с t = 0 переходят в (0, 0)"""
        eps, d = self.digits(t)
        alive = eps != 0
        safe_t = np.where(alive, t, 1.0)
        t_next = np.where(alive, eps / safe_t - d * self.lam, 0.0)
        v_next = np.where(alive, 1.0 / (d * self.lam + eps * v), 0.0)
        # округление может вывести за [ℓ_0, r_0)
        t_next = np.clip(t_next, self.left, np.nextafter(self.right, self.left))
        return t_next, v_next

    def inverse_step(self, t_next: np.ndarray, v_next: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """𝒯_α⁻¹ на массивах: перебор четырёх кандидатов (ε, d) с проверкой цифры и принадлежности"""
        s = 1.0 / v_next
        ratio = s / self.lam
        t_out = np.full_like(t_next, np.nan)
        v_out = np.full_like(v_next, np.nan)
        pending = np.ones_like(t_next, dtype=bool)
        candidates = [(1.0, np.floor(ratio)), (-1.0, np.ceil(ratio)), (1.0, np.floor(ratio) - 1), (-1.0, np.ceil(ratio) + 1)]
        for epsilon, d in candidates:
            usable = pending & (d >= 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = epsilon / (t_next + d * self.lam)
                v = epsilon * (s - d * self.lam)
            eps_t, d_t = self.digits(np.where(usable, t, 1.0))
            ok = usable & (eps_t == epsilon) & (d_t == d) & self.contains(t, v)
            t_out = np.where(ok, t, t_out)
            v_out = np.where(ok, v, v_out)
            pending &= ~ok
        return t_out, v_out

    def start(self, rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
        return rng.uniform(self.left, self.right, size), np.zeros(size)

    def uniform_points(self, rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
        """Равномерные точки Ω_α (по площади)"""
        areas = (self.rights - self.lefts) * self.heights
        choice = rng.choice(len(areas), size=size, p=areas / areas.sum())
        t = rng.uniform(self.lefts[choice], self.rights[choice])
        v = rng.uniform(0.0, self.heights[choice])
        return t, v

    def run_shard(self, seed: np.random.SeedSequence, n: int, accumulator: Accumulator) -> Accumulator:
        """n точек орбит после burn-in; точки, попавшие в 0, перезапускаются"""
        rng = np.random.default_rng(seed)
        walkers = max(1, min(self.walkers, n))
        t, v = self.start(rng, walkers)
        for _ in range(self.burn_in):
            t, v = self._advance(rng, t, v)
        collected = 0
        while collected < n:
            take = min(walkers, n - collected)
            accumulator.update(t[:take], v[:take])
            collected += take
            t, v = self._advance(rng, t, v)
        return accumulator

    def _advance(self, rng: np.random.Generator, t: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        t, v = self.step(t, v)
        dead = t == 0
        if dead.any():
            fresh_t, fresh_v = self.start(rng, int(dead.sum()))
            t[dead], v[dead] = fresh_t, fresh_v
        return t, v

    def run(
        self,
        n: int,
        seed: int,
        factory: Callable[[], Accumulator],
        shards: int = 1,
        threads: int = 1,
    ) -> Accumulator:
        """Шарды с независимыми SeedSequence.spawn; результат зависит только от (seed, shards)"""
        if n < 1:
            raise ParameterError(f"N должно быть ≥ 1: {n}")
        shards = max(1, min(shards, n))
        sizes = [n // shards + (1 if i < n % shards else 0) for i in range(shards)]
        children = np.random.SeedSequence(seed).spawn(shards)
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            parts: List[Accumulator] = list(
                pool.map(lambda job: self.run_shard(job[0], job[1], factory()), zip(children, sizes))
            )
        total = parts[0]
        for part in parts[1:]:
            total.merge(part)
        logger.info(f"Собрано {n} точек орбит в {shards} шардах (q={self.params.q.q}, α={self.params.alpha})")
        return total


class SampleCollector:
    """Сохраняет все точки; для тестов и небольших N"""

    def __init__(self) -> None:
        self.t: List[np.ndarray] = []
        self.v: List[np.ndarray] = []

    def update(self, t: np.ndarray, v: np.ndarray) -> None:
        self.t.append(t.copy())
        self.v.append(v.copy())

    def merge(self, other: "SampleCollector") -> None:
        self.t.extend(other.t)
        self.v.extend(other.v)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.concatenate(self.t), np.concatenate(self.v)


def cell_mass(a: np.ndarray, b: np.ndarray, y0: np.ndarray, y1: np.ndarray) -> np.ndarray:
    """∫_a^b ∫_{y0}^{y1} dy dx/(1+xy)²"""
    return np.log1p(b * y1) + np.log1p(a * y0) - np.log1p(a * y1) - np.log1p(b * y0)


def refine(sampler: OrbitSampler, splits: int = 2) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Разбиение каждого прямоугольника на splits × splits ячеек: (a, b, y0, y1)"""
    cells: List[Tuple[float, float, float, float]] = []
    for left, right, height in zip(sampler.lefts, sampler.rights, sampler.heights):
        xs = np.linspace(left, right, splits + 1)
        ys = np.linspace(0.0, height, splits + 1)
        for i in range(splits):
            for j in range(splits):
                cells.append((xs[i], xs[i + 1], ys[j], ys[j + 1]))
    a, b, y0, y1 = (np.array(column) for column in zip(*cells))
    return a, b, y0, y1


def locate_cells(t: np.ndarray, v: np.ndarray, cells: Sequence[np.ndarray]) -> np.ndarray:
    """Номер ячейки разбиения для каждой точки или -1"""
    a, b, y0, y1 = cells
    index = np.full(t.shape, -1, dtype=np.int64)
    for k in range(len(a)):
        inside = (t >= a[k]) & (t < b[k]) & (v >= y0[k]) & (v <= y1[k]) & (index < 0)
        index[inside] = k
    return index
