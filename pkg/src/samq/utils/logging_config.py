"""Logging configuration shared by the CLI and library users."""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..models.config import SamqConfig

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Third-party loggers that flood DEBUG output during numerical runs
NOISY_LOGGERS = ("joblib", "sklearn")


def _make_handler(log_file: Path | None) -> logging.Handler:
    if log_file is None:
        return logging.StreamHandler(sys.stderr)
    log_file.parent.mkdir(parents=True, exist_ok=True)
    return logging.FileHandler(log_file, mode="w", encoding="utf-8")


def configure_logging(
    verbose: bool = False,
    quiet: bool = False,
    log_file: Path | None = None,
) -> None:
    """Configure root handlers and levels.

    Numerical warnings (overflow in ``exp``, k-means convergence) are routed
    through the ``py.warnings`` logger so they land in the same file.

    Args:
        verbose: DEBUG level for the ``samq`` loggers (iteration details)
        quiet: Suppress all logs except errors
        log_file: Optional file path to write logs to instead of stderr

    Examples:
        from samq.utils.logging_config import configure_logging
        configure_logging(verbose=True, log_file=Path("estimate.log"))
    """
    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    level = logging.ERROR if quiet else logging.DEBUG if verbose else logging.INFO
    root_logger.setLevel(level)

    handler = _make_handler(log_file)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root_logger.addHandler(handler)
    logging.captureWarnings(True)

    logging.getLogger("samq").setLevel(logging.DEBUG if verbose else logging.NOTSET)
    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


def configure_from_config(config: SamqConfig) -> None:
    """Configure logging from a SamqConfig instance.

    Examples:
        config = SamqConfig.from_env()  # SAMQ_LOG_FILE env var
        configure_from_config(config)
    """
    configure_logging(log_file=config.log_file)
