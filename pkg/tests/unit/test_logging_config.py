"""Tests for log routing and levels."""

from __future__ import annotations

import logging
import warnings
from unittest.mock import patch

import pytest

from samq.models.config import SamqConfig
from samq.utils.logging_config import (
    NOISY_LOGGERS,
    configure_from_config,
    configure_logging,
)


@pytest.fixture(autouse=True)
def clean_root_logger():
    """Start every test from a bare root logger and undo warning capture."""
    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(logging.WARNING)
    yield
    logging.captureWarnings(False)
    root.handlers.clear()


def _written(path) -> str:
    logging.getLogger().handlers[0].flush()
    return path.read_text(encoding="utf-8")


class TestConfigureLogging:
    """Levels, handlers and third-party loggers."""

    @pytest.mark.parametrize(
        ("kwargs", "level"),
        [
            ({}, logging.INFO),
            ({"verbose": True}, logging.DEBUG),
            ({"quiet": True}, logging.ERROR),
            ({"quiet": True, "verbose": True}, logging.ERROR),
        ],
    )
    def test_root_level(self, kwargs, level):
        configure_logging(**kwargs)
        assert logging.getLogger().level == level

    def test_stderr_by_default(self):
        configure_logging()
        handlers = logging.getLogger().handlers
        assert len(handlers) == 1
        assert type(handlers[0]) is logging.StreamHandler

    def test_samq_debug_only_when_verbose(self):
        configure_logging(verbose=True)
        assert logging.getLogger("samq").level == logging.DEBUG
        configure_logging()
        assert logging.getLogger("samq").level == logging.NOTSET

    def test_file_output_in_nested_directory(self, tmp_path):
        log_file = tmp_path / "runs" / "0" / "estimate.log"
        configure_logging(verbose=True, log_file=log_file)

        logging.getLogger("samq.core.fixed_point").debug("iteration 12: step 3.1e-04")

        assert isinstance(logging.getLogger().handlers[0], logging.FileHandler)
        content = _written(log_file)
        assert "samq.core.fixed_point - DEBUG - iteration 12" in content

    def test_reconfiguring_replaces_the_handler(self, tmp_path):
        configure_logging(verbose=True)
        configure_logging(log_file=tmp_path / "second.log")

        handlers = logging.getLogger().handlers
        assert len(handlers) == 1
        assert isinstance(handlers[0], logging.FileHandler)

    @pytest.mark.parametrize("verbose", [True, False])
    def test_noisy_loggers_held_at_warning(self, verbose):
        configure_logging(verbose=verbose)
        for name in NOISY_LOGGERS:
            assert logging.getLogger(name).level == logging.WARNING

    def test_warnings_reach_the_log_file(self, tmp_path):
        log_file = tmp_path / "warn.log"
        configure_logging(log_file=log_file)

        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.warn("overflow encountered in exp", RuntimeWarning, stacklevel=1)

        content = _written(log_file)
        assert "py.warnings" in content
        assert "overflow encountered in exp" in content


class TestConfigureFromConfig:
    """Log file taken from SamqConfig."""

    def test_without_log_file(self, base_test_config):
        configure_from_config(base_test_config.model_copy(update={"log_file": None}))
        assert type(logging.getLogger().handlers[0]) is logging.StreamHandler

    def test_from_environment(self, tmp_path):
        log_file = tmp_path / "env.log"
        with patch.dict("os.environ", {"SAMQ_LOG_FILE": str(log_file)}):
            configure_from_config(SamqConfig.from_env())

        logging.getLogger("samq.envs.simulation").info("Simulated 100 transitions")
        assert "Simulated 100 transitions" in _written(log_file)
