from typing import Any
from pathlib import Path
from os import environ
import dataclasses
import logging
import sys

import dotenv
import pydantic

from muxfuse.constants import (
    CSV_COLUMNS,
    ENV_SEED,
    ENV_WORKING_DIR,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_UNSUPPORTED,
    EXIT_USAGE,
    KNN_LAYER_NAME,
)
from muxfuse.errors import MuxfuseError, NumericError, UnsupportedMethodError
from muxfuse.graph import build_knn_layer, load_dataset, with_layer, write_dataset
from muxfuse.pipeline import (
    append_metrics,
    find_report,
    load_grid_spec,
    load_report,
    load_run_config,
    method_info,
    method_table,
    run_grid,
    run_method,
    write_report,
)
from muxfuse.pipeline.reports import format_csv
from muxfuse.setup import args_setup, config_setup, logging_setup

app_config: dict[str, Any] = {}
logger: logging.Logger = logging.getLogger(__name__)


def _output_dir(arg: str | None, fallback: Path | str | None = None) -> Path:
    """--out, then MUXFUSE_DIR, then the configured working_dir, then the fallback or CWD."""
    if arg:
        return Path(arg)
    if environ.get(ENV_WORKING_DIR):
        return Path(environ[ENV_WORKING_DIR])
    if app_config.get('working_dir'):
        return Path(app_config['working_dir'])
    return Path(fallback) if fallback else Path.cwd()


def _env_seed() -> int | None:
    value = environ.get(ENV_SEED)
    if value is None or value.strip() == "":
        return None
    try:
        return int(value)
    except ValueError:
        logger.error(f"{ENV_SEED} must be an integer, got '{value}'")
        raise


def cmd_prepare(dataset_dir: Path, knn: int, out: Path | None = None) -> Path:
    """Adds a KNN feature-similarity layer to a dataset and writes the augmented copy."""
    g = load_dataset(dataset_dir)
    if KNN_LAYER_NAME in g.layers:
        logger.info(f"Dataset already has a {KNN_LAYER_NAME} layer, rebuilding it with k={knn}")
        g = dataclasses.replace(g, layers={n: e for n, e in g.layers.items() if n != KNN_LAYER_NAME})
    edges = build_knn_layer(g, knn)
    logger.info(f"Built {KNN_LAYER_NAME} layer: {edges.shape[0]} directed edges (k={knn})")
    out_dir = write_dataset(with_layer(g, KNN_LAYER_NAME, edges), out or dataset_dir)
    print(f"{KNN_LAYER_NAME}\t{edges.shape[0]}\t{out_dir}")
    return out_dir


def cmd_run(config_file: Path, seed: int | None = None, out: Path | None = None, force: bool = False) -> Path:
    """Trains one method on one dataset, then writes its report and metrics.csv rows.

    Seed precedence: the --seed flag, MUXFUSE_SEED, the run file, run_defaults.
    """
    seed_override = seed if seed is not None else _env_seed()
    cfg = load_run_config(config_file, app_config.get('run_defaults'), seed_override)
    method_info(cfg.method)
    out_dir = out or Path.cwd()

    existing = find_report(out_dir, cfg.config_hash())
    if existing is not None and not force:
        logger.info(f"Run already done (config hash {cfg.config_hash()}): {existing}. Use --force to rerun.")
        report = load_report(existing)
        print(format_csv(report.csv_rows(), CSV_COLUMNS), end="")
        return existing

    report = run_method(load_dataset(cfg.dataset), cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_file = write_report(report, out_dir)
    append_metrics(report.csv_rows(), out_dir)
    print(format_csv(report.csv_rows(), CSV_COLUMNS), end="")
    return report_file


def cmd_grid(grid_file: Path, parallel: int | None = None, out: str | None = None, force: bool = False) -> int:
    """Runs every grid cell and prints the aggregated table. Returns the number of failed cells."""
    spec = load_grid_spec(grid_file)
    grid_config = app_config.get('grid', {})
    out_dir = _output_dir(out, spec.output_dir or grid_config.get('output_dir'))
    workers = parallel or grid_config.get('parallel', 1)
    if workers < 1:
        logger.error(f"--parallel must be >= 1, got {workers}")
        raise ValueError(f"--parallel must be >= 1, got {workers}")

    result = run_grid(spec, out_dir, parallel=workers, force=force, base=app_config.get('run_defaults'))
    for outcome in result.failed:
        logger.warning(f"Cell {outcome.index} ({outcome.method}, seed {outcome.seed}): {outcome.error}")
    print(result.table_paths[0].read_text(encoding='utf-8'), end="")
    return len(result.failed)


def cmd_methods() -> None:
    """Prints the fusion taxonomy of every method id."""
    def flag(value: bool | None) -> str:
        return "-" if value is None else ("yes" if value else "no")

    print("method\tlevel\ttrainable\tself_supervised\tinductive\tdescription")
    for row in method_table():
        level = row['level'] if row['in_scope'] else "out-of-scope"
        print(f"{row['method']}\t{level}\t{flag(row['trainable_fusion'])}\t{flag(row['self_supervised'])}\t"
              f"{flag(row['inductive'])}\t{row['description']}")


def main() -> int:
    dotenv.load_dotenv()

    global app_config, logger
    parser = args_setup.init_parser()
    args: args_setup.args = parser.parse_args()

    try:
        app_config = config_setup.load_config(Path(args.config) if args.config else None)
    except (FileNotFoundError, RuntimeError, ValueError) as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_USAGE

    log_config = app_config.get('logging', {})
    log_file = logging_setup.setup_logging(
        console_level="DEBUG" if args.verbose else log_config.get('console_level', "INFO"),
        file_level=log_config.get('file_level', "DEBUG"),
        log_to_file=log_config.get('log_to_file', False)
    )
    logger = logging.getLogger(__name__)
    if log_file is not None:
        logger.debug(f"Logging to {log_file}")

    try:
        if args.command == 'prepare':
            knn = args.knn if args.knn is not None else app_config.get('prepare', {}).get('knn', 10)
            cmd_prepare(Path(args.dataset_dir), knn, Path(args.out) if args.out else None)
        elif args.command == 'run':
            cmd_run(Path(args.config_file), args.seed, _output_dir(args.out), args.force)
        elif args.command == 'grid':
            cmd_grid(Path(args.grid_file), args.parallel, args.out, args.force)
        elif args.command == 'methods':
            cmd_methods()
    except UnsupportedMethodError as e:
        logger.error(str(e))
        return EXIT_UNSUPPORTED
    except NumericError as e:
        logger.error(f"Numeric failure: {e}")
        return EXIT_NUMERIC
    except pydantic.ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    except (MuxfuseError, ValueError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
