from __future__ import annotations

import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Any

import numpy as np

from muxfuse.errors import MuxfuseError
from muxfuse.graph import load_dataset
from muxfuse.pipeline.config import GridSpec, RunConfig
from muxfuse.pipeline.reports import append_metrics, find_report, format_csv, load_report, write_report
from muxfuse.pipeline.runner import RunReport, run_method
from muxfuse.tools import file_utils

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ("dataset", "method", "runs", "maf1", "maf1_std", "nmi", "nmi_std", "sim5", "sim5_std", "variant")


@dataclass
class CellOutcome:
    index: int
    config_hash: str
    method: str
    seed: int
    status: str  # ok, skipped or failed
    report_path: str | None = None
    error: str | None = None


@dataclass
class GridResult:
    outcomes: list[CellOutcome]
    table: list[dict[str, Any]] = field(default_factory=list)
    table_paths: list[Path] = field(default_factory=list)

    @property
    def failed(self) -> list[CellOutcome]:
        return [o for o in self.outcomes if o.status == "failed"]


def run_cell(args: tuple[int, dict[str, Any], str, bool]) -> CellOutcome:
    """Runs one grid cell in isolation. Takes a tuple so it can be mapped over a pool."""
    index, config, out_dir, force = args
    cfg = RunConfig.model_validate(config)
    out = Path(out_dir)
    config_hash = cfg.config_hash()
    outcome = CellOutcome(index=index, config_hash=config_hash, method=cfg.method, seed=cfg.seed, status="ok")

    existing = find_report(out, config_hash)
    if existing is not None and not force:
        logger.info(f"Cell {index} ({cfg.method}, seed {cfg.seed}) already done: {existing.name}")
        outcome.status, outcome.report_path = "skipped", str(existing)
        return outcome
    try:
        report = run_method(load_dataset(cfg.dataset), cfg)
        outcome.report_path = str(write_report(report, out))
    except (MuxfuseError, ValueError, OSError) as e:
        logger.warning(f"Cell {index} ({cfg.method}, seed {cfg.seed}) failed: {e}")
        outcome.status, outcome.error = "failed", f"{type(e).__name__}: {e}"
    except Exception as e:
        # unexpected errors keep their traceback in the log
        logger.exception(f"Cell {index} ({cfg.method}, seed {cfg.seed}) crashed")
        outcome.status, outcome.error = "failed", f"{type(e).__name__}: {e}"
    return outcome


def _variant_key(report: RunReport) -> str:
    config = {k: v for k, v in report.config.items() if k != "seed"}
    return file_utils.stable_hash(config, length=8)


def _mean_std(values: list[float | None]) -> tuple[float | None, float | None]:
    present = [v for v in values if v is not None]
    if not present:
        return None, None
    return float(np.mean(present)), float(np.std(present))


def aggregate(reports: list[RunReport]) -> list[dict[str, Any]]:
    """Mean and std across seeds per dataset and method.

    When several hyperparameter variants of the same method ran, the one with
    the best mean validation Macro-F1 is kept. Rows follow first appearance.
    """
    variants: dict[tuple[str, str, str], list[dict[str, Any]]] = {}
    for report in reports:
        key_variant = _variant_key(report)
        for row, key in zip(report.csv_rows(), report.primary):
            block = report.metrics[key]
            variants.setdefault((row["dataset"], row["method"], key_variant), []).append(
                {**row, "val": block.val_macro_f1})

    best: dict[tuple[str, str], dict[str, Any]] = {}
    for (dataset, method, variant), rows in variants.items():
        maf1, maf1_std = _mean_std([r["maf1"] for r in rows])
        nmi, nmi_std = _mean_std([r["nmi"] for r in rows])
        sim5, sim5_std = _mean_std([r["sim5"] for r in rows])
        val, _ = _mean_std([r["val"] for r in rows])
        candidate = {"dataset": dataset, "method": method, "runs": len(rows), "maf1": maf1, "maf1_std": maf1_std,
                     "nmi": nmi, "nmi_std": nmi_std, "sim5": sim5, "sim5_std": sim5_std, "variant": variant,
                     "_val": -1.0 if val is None else val}
        current = best.get((dataset, method))
        if current is None or candidate["_val"] > current["_val"]:
            best[(dataset, method)] = candidate

    table = []
    for row in best.values():
        row.pop("_val")
        table.append(row)
    return table


def _pm(mean: float | None, std: float | None) -> str:
    if mean is None:
        return "-"
    return f"{100 * mean:.2f} ({100 * std:.2f})"


def format_markdown(table: list[dict[str, Any]]) -> str:
    lines = ["| dataset | method | runs | Macro-F1 | NMI | Sim@5 |", "|---|---|---|---|---|---|"]
    for row in table:
        lines.append(f"| {row['dataset']} | {row['method']} | {row['runs']} | {_pm(row['maf1'], row['maf1_std'])} | "
                     f"{_pm(row['nmi'], row['nmi_std'])} | {_pm(row['sim5'], row['sim5_std'])} |")
    return "\n".join(lines) + "\n"


def run_grid(spec: GridSpec,
             out_dir: Path,
             parallel: int = 1,
             force: bool = False,
             base: dict[str, Any] | None = None) -> GridResult:
    """Runs every cell of a grid and writes the aggregated table.

    Cells are independent: a failing cell is recorded and the grid goes on.
    Results are gathered in declaration order whatever the scheduling.

    Args:
        spec: Grid specification.
        out_dir: Directory of reports, metrics.csv and the tables.
        parallel: Worker processes; 1 runs in-process.
        force: Rerun cells whose report already exists.
        base: Run defaults applied under the grid's own defaults.
    """
    cells = spec.cells(base)
    if not cells:
        logger.error("Grid has no cells")
        raise ValueError("no cells")
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(i, cfg.model_dump(mode="json"), str(out_dir), force) for i, cfg in enumerate(cells)]
    logger.info(f"Running {len(tasks)} grid cells with {parallel} worker(s)")

    if parallel > 1:
        with Pool(parallel) as pool:
            outcomes = pool.map(run_cell, tasks, chunksize=1)
    else:
        outcomes = [run_cell(task) for task in tasks]

    reports: list[RunReport] = []
    fresh_rows: list[dict[str, Any]] = []
    for outcome in outcomes:
        if outcome.report_path is None:
            continue
        report = load_report(Path(outcome.report_path))
        reports.append(report)
        if outcome.status == "ok":
            fresh_rows.extend(report.csv_rows())
    if fresh_rows:
        append_metrics(fresh_rows, out_dir)

    table = aggregate(reports)
    md_path = file_utils.write_text_atomic(out_dir / "grid_table.md", format_markdown(table))
    csv_path = file_utils.write_text_atomic(out_dir / "grid_table.csv", format_csv(table, TABLE_COLUMNS))
    result = GridResult(outcomes=outcomes, table=table, table_paths=[md_path, csv_path])
    if result.failed:
        logger.warning(f"{len(result.failed)} of {len(outcomes)} grid cells failed")
    return result
