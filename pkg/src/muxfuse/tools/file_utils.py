from pathlib import Path
from typing import Any
import hashlib
import json
import logging
import os
import tempfile

from muxfuse.constants import CONFIG_SUFFIXES

logger = logging.getLogger(__name__)

class formats:
    @staticmethod
    def _is_of_type(file: Path | None, suffixes: frozenset[str]) -> bool:
        """
        Check if a file's suffix is in a given set.
        """
        return file is not None and file.suffix.lower() in suffixes

    @staticmethod
    def is_config(file: Path | None) -> bool:
        """Checks if the file is a YAML config file."""
        return formats._is_of_type(file, CONFIG_SUFFIXES)


def write_text_atomic(path: Path, text: str) -> Path:
    """Writes text through a temporary file in the same directory, then renames it.

    Args:
        path: Destination file.
        text: Content, written as UTF-8 with newline translation disabled.

    Returns:
        The destination path.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug(f"Wrote {path}")
    return path


def write_json_atomic(path: Path, data: Any) -> Path:
    """Serializes data as indented JSON with sorted keys and writes it atomically."""
    return write_text_atomic(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def stable_hash(data: Any, length: int = 16) -> str:
    """Hex digest of the canonical JSON form of data."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:length]


def get_project_dir(marker: str = "pyproject.toml") -> Path:
    """Find the project root by looking for a marker file."""
    current_path = Path(__file__).parent
    for parent in [current_path] + list(current_path.parents):
        if (parent / marker).exists():
            return parent
    raise FileNotFoundError(f"Could not find project root dir with marker '{marker}'.")
