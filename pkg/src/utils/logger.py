"""Logging configuration for the sampler, the verify suites and the CLI."""
import logging
import sys
import os
from logging.handlers import RotatingFileHandler
from typing import Optional


# Log directory and file configuration
LOG_DIR = os.getenv("GMC_LOG_DIR", "logs")
LOG_FILE = os.path.join(LOG_DIR, "geodesic_mc.log")
LOG_LEVEL = os.getenv("GMC_LOG_LEVEL", "INFO").upper()
LOG_TO_FILE = os.getenv("GMC_LOG_TO_FILE", "1").strip().lower() not in ("0", "false", "no")
MAX_LOG_SIZE = 10 * 1024 * 1024  # 10 MB
BACKUP_COUNT = 5  # Keep 5 backup files


def setup_logger(name: Optional[str] = None, level: Optional[int] = None) -> logging.Logger:
    """Setup and return a logger instance with a console handler and, unless disabled, a file handler."""
    logger = logging.getLogger(name or __name__)

    if logger.handlers:
        return logger

    if level is None:
        level = logging.getLevelName(LOG_LEVEL)
        if not isinstance(level, int):
            level = logging.INFO
    logger.setLevel(level)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    # Console handler goes to stderr so sample records and verify reports own stdout
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if LOG_TO_FILE:
        os.makedirs(LOG_DIR, exist_ok=True)
        file_handler = RotatingFileHandler(
            LOG_FILE,
            maxBytes=MAX_LOG_SIZE,
            backupCount=BACKUP_COUNT,
            encoding='utf-8'
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.propagate = False

    return logger


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Get or create a logger instance."""
    return setup_logger(name)
