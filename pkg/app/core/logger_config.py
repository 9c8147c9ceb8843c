# app/core/logger_config.py
import logging
import sys
from typing import Optional

from app.utils import constants

DEFAULT_LOG_FORMAT = constants.LOG_FORMAT
DEFAULT_LOG_LEVEL = constants.LOG_LEVEL


def setup_logging(config=None, log_file: Optional[str] = None):
    """
    Configures the root logger for the application.

    Args:
        config (Config, optional): Application Config object to retrieve log level, format and file.
        log_file (str, optional): Extra file receiving the same records as stdout.
            Falls back to the LOG_FILE setting.
    """
    log_level_str = DEFAULT_LOG_LEVEL
    log_format_str = DEFAULT_LOG_FORMAT

    if config:
        log_level_str = str(config.get("LOG_LEVEL", DEFAULT_LOG_LEVEL)).upper()
        log_format_str = config.get("LOG_FORMAT", DEFAULT_LOG_FORMAT)
        log_file = log_file or config.get("LOG_FILE")

    numeric_log_level = getattr(logging, log_level_str, logging.INFO)

    root_logger = logging.getLogger()

    # Remove any existing handlers so repeated calls (tests, several CLI runs) do not duplicate output
    if root_logger.hasHandlers():
        for handler in root_logger.handlers[:]:
            root_logger.removeHandler(handler)
            handler.close()

    handlers = [logging.StreamHandler(sys.stdout)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, mode="a", encoding="utf-8"))

    logging.basicConfig(level=numeric_log_level, format=log_format_str, handlers=handlers)

    logger = logging.getLogger(__name__)
    logger.debug(f"Root logger configured. Level: {log_level_str}, File: {log_file}")
