import logging
import os
import sys
from dotenv import load_dotenv

# Load local .env for development
load_dotenv()


def env_number(name: str, default, cast=float):
    """Positive number from the environment; unset, malformed or non-positive values give default."""
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        value = cast(raw)
    except ValueError:
        return default
    return value if value > 0 else default


LOG_ENV_VAR = "CARDSDP_LOG"
LOG_LEVEL = os.getenv(LOG_ENV_VAR, "warning")
DEFAULT_TIME_LIMIT = env_number("CARDSDP_TIME_LIMIT", 90.0)
DEFAULT_JOBS = env_number("CARDSDP_JOBS", 1, int)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_handler = None


def parse_level(value) -> int:
    """Turn a CARDSDP_LOG value ("debug", "INFO", "20", ...) into a logging level."""
    if isinstance(value, int):
        return value
    text = str(value).strip()
    if text.lstrip("-").isdigit():
        return int(text)
    level = logging.getLevelName(text.upper())
    if isinstance(level, int):
        return level
    return logging.WARNING


def configure_logging(level=None) -> int:
    """
    Install a single stderr handler on the root logger.

    Args:
        level: Level override; falls back to CARDSDP_LOG

    Returns:
        The effective numeric level
    """
    global _handler
    numeric = parse_level(LOG_LEVEL if level is None else level)
    root = logging.getLogger()
    if _handler is None:
        _handler = logging.StreamHandler(sys.stderr)
        _handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(_handler)
    root.setLevel(numeric)
    return numeric


def iteration_log_enabled(level=None) -> bool:
    """The IPM iteration log is shown for info and more verbose levels."""
    return parse_level(LOG_LEVEL if level is None else level) <= logging.INFO
