"""Logging configuration for rnpsim."""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

# Module-level logger
_logger: Optional[logging.Logger] = None

# Constants
LOGGER_NAME = "rnpsim"
LOG_FILENAME = "rnpsim.log"
MAX_BYTES = 5 * 1024 * 1024  # 5MB
BACKUP_COUNT = 3
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def get_log_path(log_dir: Path) -> Path:
    """Get the path to the log file inside a run's output directory."""
    return Path(log_dir) / LOG_FILENAME


def setup_logging(
    log_dir: Optional[Path] = None, console: bool = True, verbose: bool = False
) -> logging.Logger:
    """
    Configure and return the application logger.

    Calling again replaces the handlers, so each run can log into its own
    output directory.

    Args:
        log_dir: Directory for the rotating log file (no file logging if None)
        console: If True, also log to stderr (stdout carries reports)
        verbose: Log solver detail at DEBUG level

    Returns:
        Configured logger instance
    """
    global _logger

    logger = logging.getLogger(LOGGER_NAME)
    level = logging.DEBUG if verbose else logging.INFO
    logger.setLevel(level)
    logger.propagate = False

    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    if log_dir is not None:
        log_path = get_log_path(log_dir)
        try:
            file_handler = RotatingFileHandler(
                log_path,
                maxBytes=MAX_BYTES,
                backupCount=BACKUP_COUNT,
                encoding="utf-8",
            )
            file_handler.setLevel(level)
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)
        except OSError as e:
            # If we can't create log file, continue without file logging
            print(f"Warning: Could not create log file at {log_path}: {e}", file=sys.stderr)

    if console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    if not logger.handlers:
        logger.addHandler(logging.NullHandler())

    _logger = logger
    return logger


def get_logger() -> logging.Logger:
    """
    Get the application logger.

    Library code logs through this; without setup_logging the records are
    dropped by a NullHandler instead of reaching the root logger.
    """
    global _logger
    if _logger is None:
        logger = logging.getLogger(LOGGER_NAME)
        if not logger.handlers:
            logger.addHandler(logging.NullHandler())
        _logger = logger
    return _logger
