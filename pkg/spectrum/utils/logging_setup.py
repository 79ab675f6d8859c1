"""
Logging setup - wires the root logger from Settings.
Plain text by default, structured JSON records when LOG_FORMAT=json.
"""

import logging
import logging.handlers
from pathlib import Path
from typing import Optional

from pythonjsonlogger import jsonlogger

from spectrum.config import LogFormat, Settings, settings as default_settings

TEXT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
JSON_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"

_configured = False


def configure_logging(
    app_settings: Optional[Settings] = None,
    level: Optional[str] = None,
    force: bool = False,
) -> None:
    """
    Configure the root logger once.

    Args:
        app_settings: Settings to read (defaults to the global instance)
        level: Override for LOG_LEVEL
        force: Reconfigure even if already configured
    """
    global _configured
    if _configured and not force:
        return

    cfg = app_settings or default_settings
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)

    if cfg.LOG_FORMAT == LogFormat.JSON:
        formatter: logging.Formatter = jsonlogger.JsonFormatter(JSON_FORMAT)
    else:
        formatter = logging.Formatter(TEXT_FORMAT)

    stream = logging.StreamHandler()
    stream.setFormatter(formatter)
    root.addHandler(stream)

    if cfg.LOG_FILE:
        Path(cfg.LOG_FILE).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            cfg.LOG_FILE,
            maxBytes=cfg.LOG_MAX_BYTES,
            backupCount=cfg.LOG_BACKUP_COUNT,
        )
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

    root.setLevel((level or cfg.LOG_LEVEL).upper())
    _configured = True
