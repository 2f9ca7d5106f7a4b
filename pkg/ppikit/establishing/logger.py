"""Module to configure the logging for the package."""

import logging
import os
from pathlib import Path
from typing import Optional, Union

from ppikit.establishing.constants import DEFAULT_LOG

logger = None


def create_logger(
        log_file: Optional[Union[str, Path]] = None,
        mode: str = 'w'
) -> logging.Logger:
    """Configure the package logger writing to `log_file`.

    Worker processes attach with `mode='a'` so they do not truncate the
    coordinator's log.
    """
    global logger

    log_file = Path(log_file or DEFAULT_LOG)
    logger = logging.getLogger("ppikit")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    log_file.parent.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(log_file, mode=mode, encoding='utf-8')
    formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s: %(message)s',
        datefmt='%y-%m-%d %H:%M:%S'
    )
    file_handler.setFormatter(formatter)

    logger.addHandler(file_handler)
    logger.setLevel(logging.DEBUG)
    logger.propagate = False
    return logger


def get_logger() -> logging.Logger:
    """Return the package logger, creating it on first use."""
    if logger is None:
        return create_logger(mode='a')
    return logger


def current_log_file() -> Optional[Path]:
    """Path of the file the package logger writes to, None before setup."""
    if logger is None:
        return None
    for handler in logger.handlers:
        if isinstance(handler, logging.FileHandler):
            return Path(handler.baseFilename)
    return None


def attach_logger(log_file: Optional[Union[str, Path]]) -> logging.Logger:
    """Append to `log_file` unless the logger already writes there.

    Replications run in joblib worker processes call this with the
    coordinator's `current_log_file()`, so their records land in the same
    file instead of the default log.
    """
    if log_file is None or current_log_file() == Path(os.path.abspath(log_file)):
        return get_logger()
    return create_logger(log_file, mode='a')


class EstimationLogger:
    """Context manager to log a single estimator run"""
    def __init__(self, method: str, n_l: int, n_u: int, target: str = ""):
        self.method = method
        self.target = target
        self.n_l = n_l
        self.n_u = n_u
        self.estimate = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, exc_tb):
        if exc_type or self.estimate is None:
            result = exc_type.__name__ if exc_type else "no estimate"
        else:
            result = self.estimate.describe()
        get_logger().debug(
            '\n\t- Method: %s (%s)\n\t- Sizes: n_l=%s, n_u=%s\n\t- Result: %s',
            self.method, self.target, self.n_l, self.n_u, result
        )
        return False
