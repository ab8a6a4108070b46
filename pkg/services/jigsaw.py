from __future__ import annotations

from functools import cmp_to_key
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
from loguru import logger

from services.algebra import AlgebraicNumber, compare, number_field
from services.errors import InternalConsistencyError, ParameterError
from services.expansion import Params, digit_of
from services.natext import build_domain, make_params
from storage.models import GroupIndex, ImagePiece, NatExtDomain, Ordering, Rectangle, Regime, TilingReport

# до этой разницы приближённых значений порядок считается надёжным
_FLOAT_GAP = mpmath.mpf(2) ** -80


class ExactSorter:
	"""Сортировка точных чисел: сначала по кэшированным приближениям, при близости - точно"""

	def __init__(self, precision: int = 128) -> None:
		self.precision = precision
		self._approx: Dict[AlgebraicNumber, mpmath.mpf] = {}

	def approx(self, value: AlgebraicNumber) -> mpmath.mpf:
		cached = self._approx.get(value)
		if cached is None:
			cached = value.to_mpf(self.precision)
			self._approx[value] = cached
		return cached

	def compare(self, a: AlgebraicNumber, b: AlgebraicNumber) -> int:
		gap = self.approx(a) - self.approx(b)
		if abs(gap) > _FLOAT_GAP:
			return -1 if gap < 0 else 1
		ordering = compare(a, b)
		return -1 if ordering is Ordering.LT else 1 if ordering is Ordering.GT else 0

	def unique_sorted(self, values: Sequence[AlgebraicNumber]) -> List[AlgebraicNumber]:
		ordered = sorted(set(values), key=cmp_to_key(self.compare))
		result: List[AlgebraicNumber] = []
		for value in ordered:
			if not result or self.compare(result[-1], value) != 0:
				result.append(value)
		return result


def sweep(pieces: Sequence[ImagePiece], target: NatExtDomain, sorter: Optional[ExactSorter] = None) -> Tuple[int, List[str]]:
	"""Проверить, что куски без наложений покрывают target; возвращает число полос и список дефектов"""
	sorter = sorter or ExactSorter()
	defects: List[str] = []
	points = [piece.x0 for piece in pieces] + [piece.x1 for piece in pieces]
	points += [rect.left for rect in target.rectangles] + [target.right]
	breaks = sorter.unique_sorted(points)
	index = {value: i for i, value in enumerate(breaks)}

	left, right = index[target.left], index[target.right]
	if left != 0 or right != len(breaks) - 1:
		defects.append("образы выходят за пределы [ℓ_0, r_0)")

	heights: Dict[int, AlgebraicNumber] = {}
	for rect in target.rectangles:
		for slab in range(index[rect.left], index[rect.right]):
			heights[slab] = rect.height

	covering: Dict[int, List[ImagePiece]] = {}
	for piece in pieces:
		start, stop = index[piece.x0], index[piece.x1]
		if start >= stop:
			defects.append(f"{piece.label}: пустой или перевёрнутый отрезок по x")
			continue
		for slab in range(start, stop):
			covering.setdefault(slab, []).append(piece)

	for slab in range(len(breaks) - 1):
		stack = sorted(covering.get(slab, []), key=cmp_to_key(lambda a, b: sorter.compare(a.y0, b.y0)))
		where = f"[{mpmath.nstr(sorter.approx(breaks[slab]), 8)}, {mpmath.nstr(sorter.approx(breaks[slab + 1]), 8)})"
		height = heights.get(slab)
		if height is None:
			if stack:
				defects.append(f"полоса {where} вне Ω_α покрыта образами")
			continue
		if not stack:
			defects.append(f"полоса {where} не покрыта")
			continue
		level = number_field(target.q).zero
		for piece in stack:
			if piece.y0 != level:
				kind = "щель" if compare(piece.y0, level) is Ordering.GT else "наложение"
				defects.append(f"полоса {where}: {kind} у {piece.label}")
				break
			level = piece.y1
		else:
			if level != height:
				defects.append(f"полоса {where}: верх {mpmath.nstr(sorter.approx(level), 8)} вместо высоты Ω_α")
	return len(breaks) - 1, defects


class TilingVerifier:
	"""Точная проверка, что образы прямоугольников Ω_α под 𝒯_α складываются в Ω_α"""

	def __init__(self, q: int | GroupIndex, alpha: str | AlgebraicNumber, precision: int = 128) -> None:
		self.params: Params = make_params(q, alpha, precision)
		self.domain = build_domain(self.params.q, self.params.alpha)
		self.sorter = ExactSorter(precision)
		self.field = number_field(self.params.q)

	def _zero_neighbours(self) -> Tuple[Optional[Rectangle], Optional[Rectangle]]:
		zero = self.field.zero
		left = right = None
		for rect in self.domain.rectangles:
			if rect.left < zero < rect.right or rect.right == zero:
				left = rect
			if rect.left <= zero < rect.right:
				right = rect
		return left, right

	def tail_digit(self) -> int:
		"""Наименьшее D ≥ 2, при котором цилиндры d ≥ D лежат в прямоугольниках у нуля"""
		left, right = self._zero_neighbours()
		if right is None:
			raise InternalConsistencyError("нет прямоугольника, начинающегося в 0")
		room = right.right
		if left is not None and self.domain.left != self.field.zero:
			room = min(room, -left.left, key=self.sorter.approx)
		d = 2
		while compare(self.params.delta(d - 1), room) is Ordering.GT:
			d += 1
		return d

	def _split_points(self, D: int) -> List[AlgebraicNumber]:
		cuts = [self.field.zero]
		for d in range(1, D):
			delta = self.params.delta(d)
			cuts += [delta, -delta]
		return cuts

	def image_pieces(self) -> Tuple[List[ImagePiece], int]:
		"""Образы кусков вне хвоста и один блок [ℓ_0, r_0) × [0, 1/(Dλ−H_L)] для цилиндров d ≥ D"""
		D = self.tail_digit()
		lam = self.params.lam
		cuts = self._split_points(D)
		tail = self.params.delta(D - 1)
		pieces: List[ImagePiece] = []
		for rect in self.domain.rectangles:
			inner = [c for c in cuts if rect.left < c < rect.right]
			edges = self.sorter.unique_sorted([rect.left, rect.right] + inner)
			for a, b in zip(edges, edges[1:]):
				if compare(-tail, a) is not Ordering.GT and compare(b, tail) is not Ordering.GT:
					continue
				digit = digit_of((a + b) / 2, self.params)
				x_a = digit.epsilon / a - digit.d * lam
				x_b = digit.epsilon / b - digit.d * lam
				x0, x1 = (x_a, x_b) if self.sorter.compare(x_a, x_b) < 0 else (x_b, x_a)
				base = digit.d * lam
				if digit.epsilon > 0:
					y0, y1 = 1 / (base + rect.height), 1 / base
				else:
					y0, y1 = 1 / base, 1 / (base - rect.height)
				pieces.append(ImagePiece(x0, x1, y0, y1, f"𝒯({rect.label}∩{digit})"))

		left, right = self._zero_neighbours()
		h_left = left.height if left is not None and self.domain.left != self.field.zero else self.field.zero
		h_right = right.height if right is not None else self.field.zero
		if h_left + h_right != lam:
			raise InternalConsistencyError("H_L + H_R ≠ λ: хвостовые образы не складываются")
		top = 1 / (D * lam - h_left)
		pieces.append(ImagePiece(self.domain.left, self.domain.right, self.field.zero, top, f"хвост d ≥ {D}"))
		return pieces, D

	def verify(self) -> TilingReport:
		report = TilingReport(q=self.params.q.q, alpha=str(self.params.alpha))
		try:
			pieces, D = self.image_pieces()
		except InternalConsistencyError as e:
			logger.error(f"Ошибка при построении образов: {e}")
			report.defects.append(str(e))
			return report
		report.pieces, report.tail_digit = len(pieces), D
		report.slabs, report.defects = sweep(pieces, self.domain, self.sorter)
		logger.info(
			f"Мозаика q={report.q}, α={report.alpha}: {report.pieces} образов, {report.slabs} полос, "
			f"дефектов {len(report.defects)}"
		)
		return report


def verify_tiling(q: int | GroupIndex, alpha: str | AlgebraicNumber, precision: int = 128) -> TilingReport:
	return TilingVerifier(q, alpha, precision).verify()


def conjugate_pieces(domain: NatExtDomain) -> List[ImagePiece]:
	"""𝓜-образы прямоугольников; прямоугольник, содержащий 0, режется в 0"""
	zero = number_field(domain.q).zero
	pieces: List[ImagePiece] = []
	for rect in domain.rectangles:
		if rect.left < zero < rect.right:
			parts = [(rect.left, zero), (zero, rect.right)]
		else:
			parts = [(rect.left, rect.right)]
		for a, b in parts:
			if b <= zero:
				pieces.append(ImagePiece(-rect.height, zero, -b, -a, f"𝓜({rect.label}⁻)"))
			else:
				pieces.append(ImagePiece(zero, rect.height, a, b, f"𝓜({rect.label}⁺)"))
	return pieces


def verify_conjugacy_domains(q: int | GroupIndex) -> TilingReport:
	"""𝓜(Ω_{1/λ}) = Ω_{1/2} для чётного q"""
	group = make_params(q, "1/2").q
	if not group.is_even:
		raise ParameterError(f"𝓜 определено только для чётного q, q={group.q}")
	source = build_domain(group, "1/lambda")
	target = build_domain(group, "1/2")
	if source.regime is not Regime.EVEN_INV_LAMBDA or target.regime is not Regime.EVEN_HALF:
		raise InternalConsistencyError("неожиданные режимы для α = 1/λ и α = 1/2")
	pieces = conjugate_pieces(source)
	report = TilingReport(q=group.q, alpha="1/lambda → 1/2", pieces=len(pieces))
	report.slabs, report.defects = sweep(pieces, target)
	logger.info(f"𝓜(Ω_1/λ) = Ω_1/2 для q={group.q}: дефектов {len(report.defects)}")
	return report
