import argparse
import asyncio
import sys
from typing import Awaitable, Callable, Dict, List, Optional

from loguru import logger
from pydantic import ValidationError

from config import settings
from handlers.domain import cmd_domain
from handlers.expand import cmd_expand
from handlers.simulate import cmd_simulate
from handlers.verify import cmd_verify
from services.errors import InternalConsistencyError, RosenError
from storage.models import RunConfig

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

COMMANDS: Dict[str, Callable[[RunConfig], Awaitable[int]]] = {
	"expand": cmd_expand,
	"verify": cmd_verify,
	"domain": cmd_domain,
	"simulate": cmd_simulate,
}


def setup_logging() -> None:
	# Настройка логирования
	logger.remove()
	logger.add(sys.stderr, level=settings.log_level)
	logger.add(settings.log_file, rotation="1 day", retention="7 days", level="INFO")


def build_parser() -> argparse.ArgumentParser:
	parser = argparse.ArgumentParser(prog="rosen", description="α-цепные дроби Розена: разложения, Ω_α, проверки и эксперименты")
	subparsers = parser.add_subparsers(dest="command", required=True)

	common = argparse.ArgumentParser(add_help=False)
	common.add_argument("--q", type=int, required=True, help="индекс группы Гекке, q ≥ 3")
	common.add_argument("--alpha", default="1/2", help="α: рациональное, 1/2, 1/lambda или rho/lambda")
	common.add_argument("--precision", type=int, default=settings.precision, help="точность точной арифметики в битах, ≥ 64; simulate считает в float64 и флаг не использует")
	common.add_argument("--out", default=None, help="путь выходного файла")
	common.add_argument("--format", choices=["csv", "json"], default="json")

	expand = subparsers.add_parser("expand", parents=[common], help="цифры и подходящие дроби x")
	expand.add_argument("--x", required=True, help="точка: рациональное или выражение от lambda/rho")
	expand.add_argument("--n", type=int, default=20)

	verify = subparsers.add_parser("verify", parents=[common], help="точная проверка теорем о порядке и Ω_α")
	verify.add_argument("--grid", action="store_true", help="прогнать всю сетку data/grid.json")

	subparsers.add_parser("domain", parents=[common], help="прямоугольники Ω_α и C_{q,α}")

	simulate = subparsers.add_parser(
		"simulate",
		parents=[common],
		help="статистические эксперименты",
		description="Эксперименты по траекториям 𝒯_α в float64 (53 бита); --precision здесь не используется",
	)
	simulate.add_argument("--experiment", required=True, choices=["lenstra", "theta2d", "equidistribution"])
	simulate.add_argument("--n", type=int, default=10**6)
	simulate.add_argument("--seed", type=int, default=settings.seed)
	simulate.add_argument("--c", default=None, help="значения c через запятую")
	simulate.add_argument("--threads", type=int, default=1)
	return parser


def make_config(args: argparse.Namespace) -> RunConfig:
	fields = {key: value for key, value in vars(args).items() if key != "command" and value is not None}
	return RunConfig(**fields)


async def main(argv: Optional[List[str]] = None) -> int:
	"""Главная функция"""
	args = build_parser().parse_args(argv)
	try:
		config = make_config(args)
	except (ValidationError, RosenError) as e:
		logger.error(f"Некорректные параметры: {e}")
		print(f"❌ Некорректные параметры: {e}", file=sys.stderr)
		return EXIT_USAGE

	logger.info(f"Команда {args.command}: q={config.q}, α={config.alpha}, точность {config.precision}")
	try:
		return await COMMANDS[args.command](config)
	except InternalConsistencyError as e:
		logger.error(f"Нарушено внутреннее соотношение: {e}")
		print(f"❌ {e}", file=sys.stderr)
		return EXIT_FAILURE
	except RosenError as e:
		logger.error(f"Ошибка параметров: {e}")
		print(f"❌ {e}", file=sys.stderr)
		return EXIT_USAGE


if __name__ == "__main__":
	setup_logging()
	sys.exit(asyncio.run(main()))
