"""
Loguru sinks for the toolkit.

Reports of the CLI are printed on stdout, so log records go to stderr and to a
rotating file under ``LOG_FILE``. Services only import ``logger`` from here; the
sinks are installed once, on first import.
"""
import sys
from pathlib import Path

from loguru import logger

from src.config.settings import logging_settings

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"


def setup_logging() -> None:
    logger.remove()
    log_file = Path(logging_settings.file_path)
    log_file.parent.mkdir(parents=True, exist_ok=True)
    logger.add(sys.stderr, level=logging_settings.level, format=CONSOLE_FORMAT, colorize=True)
    # long searches (oracle, factorization) can log a lot at DEBUG
    logger.add(
        str(log_file),
        level=logging_settings.level,
        format=FILE_FORMAT,
        rotation="10 MB",
        retention="30 days",
        compression="zip",
    )
    logger.debug(f"Logging at {logging_settings.level} to stderr and {log_file}")


setup_logging()
