"""
Utility functions
Logging setup and parsing of the small spec strings used on the command line
"""
import logging
from pathlib import Path
from typing import List, Optional, Tuple

from src.core.error_handler import InvalidArgumentError

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> logging.Logger:
    """Stream handler on stderr plus an optional file handler"""
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    numeric = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric, int):
        raise InvalidArgumentError(f"unknown log level {level!r}")
    logging.basicConfig(level=numeric, format=LOG_FORMAT, handlers=handlers, force=True)

    logger = logging.getLogger(__name__)
    logger.debug("📊 Logging system initialized")
    return logger


def parse_int_list(text: str) -> List[int]:
    """``"2,3,5"`` -> [2, 3, 5]"""
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"expected a comma-separated integer list, got {text!r}") from e


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"expected a comma-separated number list, got {text!r}") from e


def parse_pairs(text: str) -> List[Tuple[int, int]]:
    """``"2:2,2:3"`` -> [(2, 2), (2, 3)]"""
    pairs = []
    for part in text.split(","):
        m, sep, n = part.partition(":")
        if not sep:
            raise InvalidArgumentError(f"expected m:n pairs, got {part!r}")
        pairs.append((int(m), int(n)))
    return pairs


def parse_seed(text: str) -> int:
    """Decimal or 0x-prefixed seed, reduced to 64 bits"""
    try:
        return int(text, 0) & ((1 << 64) - 1)
    except ValueError as e:
        raise InvalidArgumentError(f"bad seed {text!r}") from e
