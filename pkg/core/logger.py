# core/logger.py
"""
Central logging for the toolkit.

Exports:
 - ToolkitLogger   : logger implementation
 - global_logger   : wrapper with .log_debug/.log_info/.log_warning/.log_error/.log_once
                     and attribute forwarding to the underlying logging.Logger
 - logger          : same as global_logger (convenience)

Features:
 - Console handler on stderr (stdout stays free for command output)
 - Rotating file handlers: <logs_path>/all.log, info.log, warning.log, error.log
 - Module-specific file: <logs_path>/engine.log
 - log_once(msg, level='info', key=None, ttl=300) to suppress duplicate messages for a TTL

Log files never go to command output directories.
"""

import json
import logging
import logging.handlers
import os
import sys
import time
from typing import Any, Dict, Optional

from core.config import _config_path

LOGGER_NAME = "tempweak"


# --- Helpers / Filters ------------------------------------------------------
class LevelRangeFilter(logging.Filter):
    """Pass records whose level lies in [low, high]; None leaves that side open."""

    def __init__(self, low: Optional[int] = None, high: Optional[int] = None):
        super().__init__()
        self.low = logging.NOTSET if low is None else low
        self.high = logging.CRITICAL if high is None else high

    def filter(self, record: logging.LogRecord) -> bool:
        return self.low <= record.levelno <= self.high


class ModuleFilter(logging.Filter):
    """Pass records emitted from files under a given package directory."""

    def __init__(self, package: str):
        super().__init__()
        self.marker = os.sep + package + os.sep

    def filter(self, record: logging.LogRecord) -> bool:
        return self.marker in (getattr(record, "pathname", "") or "")


def ensure_logs_dir(path: str = "logs") -> bool:
    try:
        os.makedirs(path, exist_ok=True)
        return True
    except OSError:
        return False


def _read_logging_config() -> Dict[str, Any]:
    # Read the file directly: core.config would import this module back.
    try:
        with open(_config_path(), encoding="utf-8") as f:
            cfg = json.load(f)
        return cfg.get("logging", {}) if isinstance(cfg, dict) else {}
    except (OSError, ValueError):
        return {}


# --- Logger implementation --------------------------------------------------
class ToolkitLogger:
    """
    Primary logger implementation with log_once support.
    """
    def __init__(self, name: str = LOGGER_NAME):
        self._name = name
        self._logger = logging.getLogger(name)
        self._logger.setLevel(logging.DEBUG)
        self._console: Optional[logging.Handler] = None
        self._configured = False

        # For log_once dedupe: map key -> expiry_timestamp
        self._recent_once: Dict[str, float] = {}
        self._default_once_ttl = 300  # seconds

        self.configure()

    def configure(self):
        if self._configured:
            return

        logging_cfg = _read_logging_config()
        max_file_mb = logging_cfg.get("max_file_size_mb", 5)
        backup_count = logging_cfg.get("backup_count", 10)
        logs_path = os.getenv("TEMPWEAK_LOGS_PATH") or logging_cfg.get("logs_path", "logs")
        console_level = logging.getLevelName(str(logging_cfg.get("console_level", "INFO")).upper())
        if not isinstance(console_level, int):
            console_level = logging.INFO

        formatter = logging.Formatter(fmt="%(asctime)s [%(levelname)s] - %(name)s - %(message)s", datefmt="%Y-%m-%d %H:%M:%S")

        # console handler
        ch = logging.StreamHandler(sys.stderr)
        ch.setLevel(console_level)
        ch.setFormatter(formatter)
        self._logger.addHandler(ch)
        self._console = ch

        if ensure_logs_dir(logs_path):
            max_bytes = int(max_file_mb * 1024 * 1024)
            levels = {
                "all.log": (logging.DEBUG, None),
                "info.log": (logging.INFO, logging.INFO),
                "warning.log": (logging.WARNING, logging.WARNING),
                "error.log": (logging.ERROR, None),
            }
            for file_name, (low, high) in levels.items():
                fh = logging.handlers.RotatingFileHandler(
                    os.path.join(logs_path, file_name), maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8"
                )
                fh.setLevel(low)
                fh.addFilter(LevelRangeFilter(low, high))
                fh.setFormatter(formatter)
                self._logger.addHandler(fh)

            # module-specific log for the weak-label engine
            fh_engine = logging.handlers.RotatingFileHandler(
                os.path.join(logs_path, "engine.log"), maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8"
            )
            fh_engine.setLevel(logging.DEBUG)
            fh_engine.addFilter(ModuleFilter("engine"))
            fh_engine.setFormatter(formatter)
            self._logger.addHandler(fh_engine)

        self._logger.propagate = False
        self._configured = True

    @property
    def logger(self) -> logging.Logger:
        """Underlying logging.Logger"""
        return self._logger

    def set_console_level(self, level: int) -> None:
        if self._console is not None:
            self._console.setLevel(level)

    # stacklevel=3 skips this class and the wrapper so ModuleFilter sees the caller
    def log_debug(self, msg: str, *args, **kwargs):
        self._logger.debug(msg, *args, stacklevel=3, **kwargs)

    def log_info(self, msg: str, *args, **kwargs):
        self._logger.info(msg, *args, stacklevel=3, **kwargs)

    def log_warning(self, msg: str, *args, **kwargs):
        self._logger.warning(msg, *args, stacklevel=3, **kwargs)

    def log_error(self, msg: str, *args, **kwargs):
        self._logger.error(msg, *args, stacklevel=3, **kwargs)

    def log_once(self, msg: str, level: str = "info", key: Optional[str] = None, ttl: Optional[int] = None):
        """Emit `msg` once per `key` (the message itself by default) until `ttl` seconds pass."""
        dedupe_key = key or msg
        now = time.time()
        if self._recent_once.get(dedupe_key, 0.0) > now:
            return
        self._recent_once = {k: v for k, v in self._recent_once.items() if v > now}
        self._recent_once[dedupe_key] = now + float(self._default_once_ttl if ttl is None else ttl)

        level_no = logging.getLevelName((level or "info").upper())
        if not isinstance(level_no, int):
            level_no = logging.INFO
        self._logger.log(level_no, msg, stacklevel=3)


# Wrapper that exposes log_* methods AND forwards unknown attributes to underlying logging.Logger.
class LoggerWrapper:
    def __init__(self, toolkit_logger: ToolkitLogger):
        self._impl = toolkit_logger

    def log_debug(self, *a, **k): return self._impl.log_debug(*a, **k)
    def log_info(self, *a, **k): return self._impl.log_info(*a, **k)
    def log_warning(self, *a, **k): return self._impl.log_warning(*a, **k)
    def log_error(self, *a, **k): return self._impl.log_error(*a, **k)
    def log_once(self, *a, **k): return self._impl.log_once(*a, **k)
    def set_console_level(self, level: int): return self._impl.set_console_level(level)

    # forward other attributes (like .info, .debug) to the underlying logging.Logger
    def __getattr__(self, name):
        try:
            return getattr(self._impl.logger, name)
        except Exception:
            raise AttributeError(name)


_toolkit_logger_instance = ToolkitLogger()
_wrapped_logger = LoggerWrapper(_toolkit_logger_instance)

global_logger = _wrapped_logger
logger = _wrapped_logger
