from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from loguru import logger

from config import settings
from services.natext import domain_mass, normalizing_constant
from storage.models import Certificate, ExperimentTable, NatExtDomain, OutputFormat, TilingReport
from utils.formatting import exact_entry, format_decimal, precision_note, sanitize_token


class ReportService:
	def __init__(self, export_dir: Optional[str] = None) -> None:
		self.export_dir = Path(export_dir or settings.export_dir)
		self.export_dir.mkdir(parents=True, exist_ok=True)

	def _target(self, out: Optional[Path], stem: str, fmt: OutputFormat) -> Path:
		if out is not None:
			path = Path(out)
			path.parent.mkdir(parents=True, exist_ok=True)
			return path
		return self.export_dir / f"{stem}.{fmt.value}"

	@staticmethod
	def _write_json(path: Path, payload: Dict[str, Any]) -> None:
		with open(path, "w", encoding="utf-8") as f:
			json.dump(payload, f, ensure_ascii=False, indent=2)
			f.write("\n")

	@staticmethod
	def _write_csv(path: Path, metadata: Dict[str, Any], df: pd.DataFrame) -> None:
		"""CSV с заголовком из строк '# ключ: значение'"""
		with open(path, "w", encoding="utf-8", newline="") as f:
			for key, value in metadata.items():
				f.write(f"# {key}: {value}\n")
			df.to_csv(f, index=False, float_format="%.12g")

	def export_table(self, table: ExperimentTable, fmt: OutputFormat, out: Optional[Path] = None) -> Path:
		"""Таблица эксперимента в CSV или JSON"""
		stem = f"{table.experiment}_q{table.metadata['q']}_a{sanitize_token(str(table.metadata['alpha']))}"
		path = self._target(out, stem, fmt)
		try:
			if fmt is OutputFormat.CSV:
				df = pd.DataFrame(table.rows, columns=table.columns)
				metadata = {"experiment": table.experiment, **table.metadata, **table.summary}
				self._write_csv(path, metadata, df)
			else:
				payload = {
					"schema": 1,
					"experiment": table.experiment,
					"metadata": table.metadata,
					"summary": table.summary,
					"columns": table.columns,
					"rows": [[float(cell) for cell in row] for row in table.rows],
				}
				self._write_json(path, payload)
		except Exception as e:
			logger.error(f"Ошибка при записи {path}: {e}")
			raise
		logger.info(f"Сохранён отчёт {table.experiment}: {path}")
		return path

	def export_certificate(self, certificate: Certificate, out: Optional[Path] = None, tiling: Optional[TilingReport] = None) -> Path:
		stem = f"verify_q{certificate.q}_a{sanitize_token(certificate.alpha)}"
		path = self._target(out, stem, OutputFormat.JSON)
		payload = certificate.to_dict()
		if tiling is not None:
			payload["tiling"] = tiling.to_dict()
		self._write_json(path, payload)
		logger.info(f"Сохранён сертификат: {path}")
		return path

	def export_grid(self, certificates: List[Certificate], out: Optional[Path] = None) -> Path:
		path = self._target(out, "verify_grid", OutputFormat.JSON)
		payload = {
			"schema": 1,
			"status": "PASS" if all(c.ok for c in certificates) else "FAIL",
			"certificates": [c.to_dict() for c in certificates],
		}
		self._write_json(path, payload)
		logger.info(f"Сохранено {len(certificates)} сертификатов: {path}")
		return path

	@staticmethod
	def domain_payload(domain: NatExtDomain, precision: int) -> Dict[str, Any]:
		"""Прямоугольники Ω_α с точными и десятичными концами, C_{q,α} и невязка 1/C − масса"""
		mass = domain_mass(domain, precision)
		constant = normalizing_constant(domain.q, domain.alpha, precision)
		residual = abs(1 / constant.value - mass.value)
		return {
			"schema": 1,
			"q": domain.q.q,
			"alpha": exact_entry(domain.alpha, precision),
			"regime": domain.regime.value,
			"precision": precision_note(precision),
			"critical_digits": dict(domain.critical_digits),
			"dropped_intervals": domain.dropped,
			"rectangles": [
				{
					"label": rect.label,
					"left": exact_entry(rect.left, precision),
					"right": exact_entry(rect.right, precision),
					"height": exact_entry(rect.height, precision),
				}
				for rect in domain.rectangles
			],
			"normalizing_constant": {
				"formula": constant.formula,
				"argument": exact_entry(constant.argument, precision),
				"value": format_decimal(constant.value, precision),
			},
			"mass": format_decimal(mass.value, precision),
			"mass_residual": format_decimal(residual, 64),
		}

	def export_domain(self, domain: NatExtDomain, fmt: OutputFormat, precision: int, out: Optional[Path] = None) -> Tuple[Path, Dict[str, Any]]:
		stem = f"domain_q{domain.q.q}_a{sanitize_token(str(domain.alpha))}"
		path = self._target(out, stem, fmt)
		payload = self.domain_payload(domain, precision)
		try:
			if fmt is OutputFormat.JSON:
				self._write_json(path, payload)
			else:
				rows = [
					[r["label"], r["left"]["exact"], r["right"]["exact"], r["height"]["exact"],
					 r["left"]["decimal"], r["right"]["decimal"], r["height"]["decimal"]]
					for r in payload["rectangles"]
				]
				df = pd.DataFrame(rows, columns=["label", "left", "right", "height", "left_dec", "right_dec", "height_dec"])
				metadata = {
					"q": payload["q"],
					"alpha": payload["alpha"]["exact"],
					"regime": payload["regime"],
					"dropped_intervals": payload["dropped_intervals"],
					"precision": payload["precision"],
					"C": payload["normalizing_constant"]["value"],
					"mass_residual": payload["mass_residual"],
				}
				self._write_csv(path, metadata, df)
		except Exception as e:
			logger.error(f"Ошибка при записи области {path}: {e}")
			raise
		logger.info(f"Сохранена область Ω_α ({len(domain.rectangles)} прямоугольников): {path}")
		return path, payload
