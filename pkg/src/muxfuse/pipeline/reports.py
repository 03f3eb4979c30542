from __future__ import annotations

import csv
import io
import logging
import re
from pathlib import Path
from typing import Any, Iterable

from muxfuse.constants import CSV_COLUMNS, METRICS_CSV_NAME
from muxfuse.pipeline.runner import RunReport
from muxfuse.tools import file_utils

logger = logging.getLogger(__name__)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "run"


def report_path(out_dir: Path, report: RunReport) -> Path:
    return out_dir / f"{_slug(report.dataset)}__{_slug(report.method)}__seed{report.seed}__{report.config_hash}.json"


def find_report(out_dir: Path, config_hash: str) -> Path | None:
    """Existing report written for a config hash, if any."""
    if not out_dir.exists():
        return None
    matches = sorted(out_dir.glob(f"*__{config_hash}.json"))
    return matches[0] if matches else None


def write_report(report: RunReport, out_dir: Path) -> Path:
    path = file_utils.write_text_atomic(report_path(out_dir, report), report.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote run report to {path}")
    return path


def load_report(path: Path) -> RunReport:
    return RunReport.model_validate_json(Path(path).read_text(encoding='utf-8'))


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(rows: Iterable[dict[str, Any]], columns: Iterable[str] = CSV_COLUMNS, header: bool = True) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    columns = list(columns)
    if header:
        writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row.get(column)) for column in columns])
    return buffer.getvalue()


def append_metrics(rows: list[dict[str, Any]], out_dir: Path) -> Path:
    """Appends rows to metrics.csv, rewriting the file atomically."""
    path = out_dir / METRICS_CSV_NAME
    existing = path.read_text(encoding='utf-8') if path.exists() else ""
    text = existing + format_csv(rows, header=not existing)
    file_utils.write_text_atomic(path, text)
    logger.debug(f"Appended {len(rows)} rows to {path}")
    return path
