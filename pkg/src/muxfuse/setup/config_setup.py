from muxfuse.constants import APP_NAME
from muxfuse.constants import CONFIG_FILE_NAME
from muxfuse.constants import TEMPLATE_CONFIG_FILE_NAME
from muxfuse.tools import file_utils

import platformdirs
import yaml

import shutil
import importlib.resources
import logging
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)

DEFAULTS_PACKAGE = 'muxfuse.defaults'


def _read(path: Path) -> dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as f:
        return yaml.safe_load(f) or {}


def load_packaged_default() -> dict[str, Any]:
    """Loads the `default_config.yaml` shipped with the package."""
    try:
        with importlib.resources.files(DEFAULTS_PACKAGE).joinpath(TEMPLATE_CONFIG_FILE_NAME).open('r', encoding='utf-8') as f:
            return yaml.safe_load(f) or {}
    except (FileNotFoundError, ModuleNotFoundError):
        logger.critical("Fatal: Could not find the packaged default config.")
        raise RuntimeError("Fatal: Could not find the packaged default config.")


def load_config(arg: Path | None = None) -> dict[str, Any]:
    """
    Load configuration from a YAML file with a fallback mechanism.

    The lookup order is:
    1. Path given with `--config`.
    2. `config.yaml` in the project root (for development).
    3. `config.yaml` in the user's config directory (e.g., ~/.config/muxfuse/).
    4. The default `default_config.yaml` packaged with the application.

    Sections missing from the chosen file are filled in from the packaged default.
    """
    defaults = load_packaged_default()

    # 1. Explicit path
    if arg is not None:
        if not arg.exists():
            logger.error(f"Config file does not exist: {arg}")
            raise FileNotFoundError(f"Config file does not exist: {arg}")
        logger.debug(f"Loading config from {arg}")
        return {**defaults, **_read(arg)}

    # 2. Project root (for local development)
    try:
        dev_config_path = file_utils.get_project_dir() / CONFIG_FILE_NAME
        if dev_config_path.exists():
            logger.debug(f"Loading config from dev directory: {dev_config_path}")
            return {**defaults, **_read(dev_config_path)}
    except FileNotFoundError:
        pass

    # 3. User config directory, created from the default when missing
    user_config_dir = Path(platformdirs.user_config_dir(APP_NAME, appauthor=False))
    user_config_path = user_config_dir / CONFIG_FILE_NAME

    if not user_config_path.exists():
        logger.debug(f"User config not found. Creating default at {user_config_path.resolve()}")
        try:
            with importlib.resources.as_file(importlib.resources.files(DEFAULTS_PACKAGE).joinpath(TEMPLATE_CONFIG_FILE_NAME)) as default_path:
                user_config_dir.mkdir(parents=True, exist_ok=True)
                shutil.copy(default_path, user_config_path)
        except (FileNotFoundError, PermissionError, OSError) as e:
            # 4. Packaged default
            logger.warning(f"Could not create user config file ({e}). Using the packaged default.")
            return defaults

    logger.debug(f"Loading config from user directory: {user_config_path}")
    return {**defaults, **_read(user_config_path)}
