import asyncio
from fractions import Fraction
from typing import List

from loguru import logger

from config import settings
from services.errors import ParameterError
from services.metrics import equidistribution, lenstra_constant, lenstra_experiment, lenstra_table, theta_distribution_experiment
from services.report_service import ReportService
from services.sampler import SAMPLER_BITS
from storage.models import Experiment, ExperimentTable, RunConfig

# кратные 1/𝓛_α, если --c не задан
DEFAULT_C_MULTIPLES = (1, 2, 5)


def parse_thresholds(config: RunConfig) -> List[float]:
	"""Значения c из --c через запятую; по умолчанию 1/𝓛, 2/𝓛, 5/𝓛"""
	if config.c is None:
		base = 1 / float(lenstra_constant(config.q, config.alpha))
		return [k * base for k in DEFAULT_C_MULTIPLES]
	try:
		return [float(Fraction(token.strip())) for token in config.c.split(",") if token.strip()]
	except (ValueError, ZeroDivisionError) as e:
		raise ParameterError(f"некорректное значение --c {config.c!r}: {e}") from e


def run_experiment(config: RunConfig) -> ExperimentTable:
	if config.experiment is Experiment.LENSTRA:
		results = lenstra_experiment(
			config.q, config.alpha, parse_thresholds(config), config.n, config.seed, threads=config.threads
		)
		return lenstra_table(config.q, config.alpha, results, config.seed)
	if config.experiment is Experiment.THETA2D:
		return theta_distribution_experiment(
			config.q, config.alpha, settings.histogram_grid, config.n, config.seed, threads=config.threads
		)
	if config.experiment is Experiment.EQUIDISTRIBUTION:
		return equidistribution(config.q, config.alpha, config.n, config.seed, threads=config.threads)
	raise ParameterError("для simulate нужен --experiment: lenstra, theta2d или equidistribution")


def summary_lines(table: ExperimentTable) -> List[str]:
	lines = [f"📊 {table.experiment}: q={table.metadata['q']}, α={table.metadata['alpha']}, N={table.metadata['N']}, seed={table.metadata['seed']}"]
	if table.experiment == Experiment.LENSTRA.value:
		for c, empirical, theoretical, _, z in table.rows:
			lines.append(f"   c={c:.6f}: эмпирика {empirical:.6f}, теория {theoretical:.6f}, z={z:+.2f}")
	for key, value in table.summary.items():
		lines.append(f"   {key}: {value:.6g}" if isinstance(value, float) else f"   {key}: {value}")
	return lines


async def cmd_simulate(config: RunConfig) -> int:
	"""Обработчик команды simulate"""
	if config.precision != settings.precision:
		logger.warning(f"--precision {config.precision} не влияет на траектории: они считаются в float64 ({SAMPLER_BITS} бит)")
	table = await asyncio.to_thread(run_experiment, config)
	path = ReportService().export_table(table, config.format, config.out)
	for line in summary_lines(table):
		print(line)
	print(f"Файл: {path}")
	if table.experiment == Experiment.EQUIDISTRIBUTION.value and table.summary["max_abs_z"] > settings.equidistribution_sigma:
		logger.warning(f"max|z| = {table.summary['max_abs_z']:.2f} выше порога {settings.equidistribution_sigma}")
	return 0
