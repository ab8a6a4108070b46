import asyncio
from typing import List, Optional, Tuple

from loguru import logger

from services.jigsaw import verify_tiling
from services.natext import full_certificate
from services.report_service import ReportService
from storage.grid import load_grid_from_json
from storage.models import Certificate, RunConfig, TilingReport


def _status(ok: bool) -> str:
	return "✅ PASS" if ok else "❌ FAIL"


def certificate_lines(certificate: Certificate, tiling: Optional[TilingReport] = None) -> List[str]:
	lines = [f"{_status(certificate.ok)} q={certificate.q}, α={certificate.alpha} ({certificate.regime.value}), проверок: {len(certificate.checks)}"]
	for name, value in certificate.critical_digits.items():
		lines.append(f"   {name} = {value}")
	for check in certificate.failures:
		lines.append(f"   ✗ {check.label} [{check.relation}]: {check.lhs:.12g} против {check.rhs:.12g}")
	if tiling is not None:
		lines.append(f"   мозаика: {_status(tiling.ok)}, образов {tiling.pieces}, полос {tiling.slabs}")
		for defect in tiling.defects:
			lines.append(f"   ✗ {defect}")
	return lines


def _verify_one(config: RunConfig) -> Tuple[Certificate, TilingReport]:
	certificate = full_certificate(config.q, config.alpha, config.precision)
	return certificate, verify_tiling(config.q, config.alpha, config.precision)


def _verify_grid(config: RunConfig) -> List[Certificate]:
	return [full_certificate(q, alpha, config.precision) for q, alpha in load_grid_from_json()]


async def cmd_verify(config: RunConfig) -> int:
	"""Обработчик команды verify: 0 - все проверки прошли, 1 - есть нарушения"""
	service = ReportService()
	if config.grid:
		certificates = await asyncio.to_thread(_verify_grid, config)
		for certificate in certificates:
			if not certificate.ok:
				for line in certificate_lines(certificate):
					print(line)
		failed = sum(1 for c in certificates if not c.ok)
		path = service.export_grid(certificates, config.out)
		print(f"{_status(failed == 0)} сетка: {len(certificates) - failed}/{len(certificates)} сертификатов, отчёт {path}")
		return 0 if failed == 0 else 1

	certificate, tiling = await asyncio.to_thread(_verify_one, config)
	for line in certificate_lines(certificate, tiling):
		print(line)
	path = service.export_certificate(certificate, config.out, tiling)
	print(f"Сертификат: {path}")
	ok = certificate.ok and tiling.ok
	if not ok:
		logger.warning(f"Проверка q={config.q}, α={config.alpha} не пройдена")
	return 0 if ok else 1
