"""
Utility decorators
Timing for the expensive sync and async computations
"""
import asyncio
import logging
import time
from functools import wraps
from typing import Callable

logger = logging.getLogger(__name__)


def timing_decorator(func: Callable) -> Callable:
    """Decorator to measure function execution time"""

    @wraps(func)
    async def async_wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        result = await func(*args, **kwargs)
        logger.debug(f"⏱️ {func.__qualname__} executed in {time.perf_counter() - start_time:.4f}s")
        return result

    @wraps(func)
    def sync_wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        logger.debug(f"⏱️ {func.__qualname__} executed in {time.perf_counter() - start_time:.4f}s")
        return result

    return async_wrapper if asyncio.iscoroutinefunction(func) else sync_wrapper
