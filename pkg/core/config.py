# core/config.py
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Load environment variables from .env
load_dotenv()

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "config" / "config.json"

# Global config cache
_CONFIG: Dict[str, Any] = {}


def _config_path() -> Path:
    override = os.getenv("TEMPWEAK_CONFIG")
    return Path(override) if override else DEFAULT_CONFIG_PATH


def _load_config() -> Dict[str, Any]:
    """Load config.json once; an unreadable file leaves the in-code defaults in charge."""
    global _CONFIG
    if not _CONFIG:
        # ❌ Avoid top-level logger import to prevent circular dependency
        from core.logger import global_logger as logger

        config_path = _config_path()
        try:
            if not config_path.exists():
                raise FileNotFoundError(f"Config file not found at {config_path}")
            with open(config_path, encoding="utf-8") as f:
                _CONFIG = json.load(f)
            logger.log_debug(f"✅ Config loaded from {config_path}")
        except json.JSONDecodeError as e:
            logger.log_error(f"❌ Invalid JSON in config: {e}")
            _CONFIG = {}
        except Exception as e:
            logger.log_error(f"❌ Failed to load config: {e}")
            _CONFIG = {}
    return _CONFIG


def reload_config() -> Dict[str, Any]:
    """Drop the cache and read the file again (tests switch TEMPWEAK_CONFIG)."""
    global _CONFIG
    _CONFIG = {}
    return _load_config()


# ========================
# Class table
# ========================

def get_class_names() -> List[str]:
    return _load_config().get("classes", {}).get("names", ["background", "building"])


def get_background_class() -> int:
    return int(_load_config().get("classes", {}).get("background", 0))


def get_foreground_names() -> List[str]:
    return _load_config().get("classes", {}).get("foreground", ["building"])


def resolve_class(token: str) -> int:
    """Map a class name from the class table, or a plain index, to an index."""
    token = str(token).strip()
    if token.isdigit():
        return int(token)
    names = get_class_names()
    if token in names:
        return names.index(token)
    raise KeyError(token)


# ========================
# Weak label generation
# ========================

def get_siou_config() -> Dict[str, Any]:
    return _load_config().get("siou", {
        "tau": 0.25,
        "connectivity": 8,
        "classes_of_interest": [1]
    })


def get_tau() -> float:
    return float(get_siou_config().get("tau", 0.25))


def get_connectivity() -> int:
    return int(get_siou_config().get("connectivity", 8))


def get_classes_of_interest() -> List[int]:
    return [int(c) for c in get_siou_config().get("classes_of_interest", [1])]


def get_sampling_config() -> Dict[str, Any]:
    return _load_config().get("sampling", {
        "batch_size": 32,
        "p_real": 0.25,
        "batches": 1,
        "target_method": "siou"
    })


# ========================
# Refinement / evaluation
# ========================

def get_refinement_threshold() -> float:
    return float(_load_config().get("refinement", {}).get("threshold", 0.02))


def get_n_iter() -> int:
    return int(_load_config().get("refinement", {}).get("n_iter", 3))


def get_median_window() -> int:
    return int(_load_config().get("metrics", {}).get("median_window", 5))


def get_default_resolution() -> float:
    return float(_load_config().get("metrics", {}).get("default_resolution", 1.0))


def get_tiling_config() -> Dict[str, Any]:
    return _load_config().get("tiling", {"tile_size": 256, "overlap": 6})


def get_synth_config() -> Dict[str, Any]:
    return _load_config().get("synth", {
        "pairs": 64,
        "size": 64,
        "blob_count": [1, 4],
        "blob_size": [4, 12],
        "change_rate": 0.1,
        "jitter": 1,
        "val_fraction": 0.0,
        "resolution": 0.2
    })


# ========================
# Workers
# ========================

def get_thread_count(cli_value: Optional[int] = None) -> int:
    """--threads beats TEMPWEAK_THREADS beats config.json."""
    if cli_value is not None:
        return max(1, int(cli_value))
    env_value = os.getenv("TEMPWEAK_THREADS")
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            from core.logger import global_logger as logger
            logger.log_once(f"⚠️ Ignoring non-integer TEMPWEAK_THREADS={env_value!r}", level="warning")
    return max(1, int(_load_config().get("workers", {}).get("threads", 1)))

