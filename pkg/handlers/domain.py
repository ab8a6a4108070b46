import asyncio

from services.natext import build_domain, make_params
from services.report_service import ReportService
from storage.models import RunConfig


async def cmd_domain(config: RunConfig) -> int:
	"""Обработчик команды domain"""
	params = make_params(config.q, config.alpha, config.precision)
	domain = await asyncio.to_thread(build_domain, params.q, params.alpha)
	service = ReportService()
	path, payload = await asyncio.to_thread(service.export_domain, domain, config.format, config.precision, config.out)

	print(f"📐 Ω_α для q={payload['q']}, α={payload['alpha']['exact']} ({payload['regime']})")
	print(f"Прямоугольников: {len(domain.rectangles)}, пустых отброшено: {domain.dropped}")
	for rect in payload["rectangles"]:
		print(f"   {rect['label']}: [{rect['left']['decimal']}, {rect['right']['decimal']}) × [0, {rect['height']['decimal']}]")
	print(f"C = {payload['normalizing_constant']['value']} ({payload['precision']})")
	print(f"|1/C − масса| = {payload['mass_residual']}")
	print(f"Файл: {path}")
	return 0
