"""General utility helper functions."""

import time
from functools import wraps
from typing import Any, Callable, List, Tuple, TypeVar, Union

import numpy as np

from kernel_estimation.utils.errors import InvalidArgumentError
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

T = TypeVar("T")


def measure_time(func: Callable[..., T]) -> Callable[..., T]:
    """
    Decorator to measure function execution time.

    Args:
        func: Function to measure

    Returns:
        Decorated function
    """
    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> T:
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        elapsed_ms = (time.perf_counter() - start_time) * 1000
        logger.debug(
            f"Function {func.__name__} took {elapsed_ms:.2f}ms",
            function=func.__name__,
            duration_ms=elapsed_ms
        )
        return result

    return wrapper


def derive_rng(seed: int, *indices: int) -> np.random.Generator:
    """
    Build an independent generator from a seed and a path of indices.

    The same (seed, indices) always yields the same stream, and different
    index paths yield statistically independent streams.

    Args:
        seed: Base seed
        *indices: Non-negative integers identifying the consumer

    Returns:
        Seeded numpy Generator
    """
    entropy = [int(seed)] + [int(i) for i in indices]
    if any(value < 0 for value in entropy):
        raise InvalidArgumentError("Seeds and indices must be non-negative", argument="seed")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def parse_int_list(value: Union[str, List[int], Tuple[int, ...]]) -> List[int]:
    """
    Parse a comma separated list of integers.

    Args:
        value: String such as "128,256,128" or an existing sequence

    Returns:
        List of integers
    """
    if isinstance(value, str):
        parts = [part.strip() for part in value.replace(" ", ",").split(",")]
        return [int(part) for part in parts if part]
    return [int(v) for v in value]
