"""Utility functions."""

from __future__ import annotations

from .io import load_dataset, save_dataset
from .logging_config import configure_from_config, configure_logging

__all__ = [
    "configure_from_config",
    "configure_logging",
    "load_dataset",
    "save_dataset",
]
