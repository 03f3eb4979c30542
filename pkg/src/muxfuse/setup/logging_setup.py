from muxfuse.constants import APP_NAME, ENV_LOG_DIR

import platformdirs

from os import environ
from pathlib import Path
import logging
import logging.handlers
import sys

CONSOLE_FORMAT = "[%(levelname)s] %(message)s"
# grid cells log from pool workers, so the file records the process
FILE_FORMAT = "%(asctime)s - %(processName)s - %(levelname)s - %(message)s (%(name)s)"
LOG_FILE_BYTES = 1_000_000
LOG_FILE_BACKUPS = 5


def resolve_log_dir(log_dir: Path | None = None) -> Path:
    """The explicit directory, then MUXFUSE_LOG_DIR, then the user state dir."""
    if log_dir:
        return log_dir
    if environ.get(ENV_LOG_DIR):
        return Path(environ[ENV_LOG_DIR])
    return Path(platformdirs.user_state_dir(APP_NAME, appauthor=False))


def _file_handler(log_dir: Path, level: str) -> logging.Handler | None:
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logging.warning(f"File logging disabled, cannot create {log_dir}: {e}")
        return None
    handler = logging.handlers.RotatingFileHandler(
        log_dir / f"{APP_NAME}.log", maxBytes=LOG_FILE_BYTES, backupCount=LOG_FILE_BACKUPS, encoding='utf-8'
    )
    handler.setLevel(level.upper())
    handler.setFormatter(logging.Formatter(FILE_FORMAT))
    return handler


def setup_logging(
    console_level: str = "WARNING",
    file_level: str = "DEBUG",
    log_to_file: bool = False,
    log_dir: Path | None = None
) -> Path | None:
    """
    Routes every muxfuse logger to stdout and, optionally, a rotating log file.

    Calling it again replaces the handlers of the previous call.

    Args:
        console_level (str): Level of the stdout handler (e.g., 'INFO', 'DEBUG' with --verbose).
        file_level (str): Level of the file handler; per-epoch losses are DEBUG.
        log_to_file (bool): Whether to add the file handler.
        log_dir (Path | None): Directory of muxfuse.log; see resolve_log_dir.

    Returns:
        Path | None: The log file, or None when file logging is off or unavailable.
    """
    root = logging.getLogger()
    root.setLevel(logging.NOTSET)
    root.handlers.clear()

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(console_level.upper())
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    root.addHandler(console_handler)
    logging.debug(f"Console logging at level {console_level.upper()}")

    if not log_to_file:
        return None
    directory = resolve_log_dir(log_dir)
    file_handler = _file_handler(directory, file_level)
    if file_handler is None:
        return None
    root.addHandler(file_handler)
    log_file = directory / f"{APP_NAME}.log"
    logging.debug(f"File logging at level {file_level.upper()} to {log_file}")
    return log_file
