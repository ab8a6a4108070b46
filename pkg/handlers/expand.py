import asyncio
from typing import List

import mpmath
from loguru import logger

from services.algebra import parse_token
from services.errors import ParameterError
from services.expansion import Params, convergence_constant, convergents, orbit
from storage.models import RunConfig
from utils.formatting import format_decimal, precision_note, table_lines


def expansion_lines(config: RunConfig) -> List[str]:
	"""Цифры x и таблица подходящих дробей с фактической ошибкой и оценкой"""
	if config.x is None:
		raise ParameterError("для expand нужен --x")
	params = Params.from_tokens(config.q, config.alpha, config.precision)
	x = parse_token(config.x, params.q)
	path = orbit(x, config.n, params)
	pairs = convergents(path.digits, params)
	constant = convergence_constant(params)
	prec = config.precision

	rows = []
	for pair, digit in zip(pairs[1:], path.digits):
		value = pair.R / pair.S
		error = abs(x - value)
		bound = constant / (pair.S * pair.S)
		rows.append([
			str(pair.n),
			str(digit),
			format_decimal(value, prec),
			mpmath.nstr(error.to_mpf(prec), 6),
			mpmath.nstr(bound.to_mpf(prec), 6),
		])

	lines = [
		f"🔢 x = {x}, q = {params.q.q}, α = {params.alpha}",
		f"Точность: {precision_note(prec)}",
	]
	lines += table_lines(["n", "(ε:d)", "R_n/S_n", "|x − R_n/S_n|", "оценка"], rows)
	if path.terminated:
		lines.append(f"⏹ Орбита попала в 0 на шаге {len(path.digits)}: разложение конечно")
	return lines


async def cmd_expand(config: RunConfig) -> int:
	"""Обработчик команды expand"""
	lines = await asyncio.to_thread(expansion_lines, config)
	for line in lines:
		print(line)
	logger.info(f"Разложение x={config.x} для q={config.q}, α={config.alpha} выведено")
	return 0
