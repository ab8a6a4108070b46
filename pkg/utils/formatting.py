import math
import re
from typing import Any, List, Sequence

import mpmath
from mpmath import mp

from services.algebra import AlgebraicNumber
from storage.models import Digit


def decimal_digits(precision: int) -> int:
	"""Число значащих десятичных цифр, гарантированных при точности precision бит"""
	return max(1, int(precision * math.log10(2)) - 2)


def format_decimal(value: Any, precision: int) -> str:
	"""Десятичная запись с числом цифр, отвечающим точности"""
	if isinstance(value, AlgebraicNumber):
		value = value.to_mpf(precision)
	with mp.workprec(precision):
		return mpmath.nstr(mp.mpf(value), decimal_digits(precision), strip_zeros=False)


def precision_note(precision: int) -> str:
	return f"{decimal_digits(precision)} значащих цифр ({precision} бит)"


def format_digits(digits: Sequence[Digit]) -> str:
	return ", ".join(str(digit) for digit in digits) or "—"


def exact_entry(value: AlgebraicNumber, precision: int) -> dict:
	"""Точное значение как вектор коэффициентов плюс десятичная запись"""
	return {**value.to_dict(), "exact": str(value), "decimal": format_decimal(value, precision)}


def sanitize_token(text: str) -> str:
	"""Токен α или x в виде, пригодном для имени файла"""
	replaced = text.replace("/", "_").replace("λ", "lambda").replace("ρ", "rho")
	return re.sub(r"[^0-9A-Za-z_.+-]", "", replaced) or "value"


def table_lines(header: List[str], rows: List[List[str]]) -> List[str]:
	"""Выравнивание столбцов для вывода в терминал"""
	widths = [max(len(str(cell)) for cell in column) for column in zip(header, *rows)]
	lines = ["  ".join(str(cell).rjust(width) for cell, width in zip(header, widths))]
	for row in rows:
		lines.append("  ".join(str(cell).rjust(width) for cell, width in zip(row, widths)))
	return lines
